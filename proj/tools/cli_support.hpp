#pragma once

// Plumbing shared by the pdisc subcommands: JSON configuration files for CLI11,
// content hashes, and the artifact writer that produces the run manifest.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <array>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "photon_discerner/io.hpp"

namespace pdisc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Git blob id: SHA-1 over "blob <size>\0" followed by the bytes.
inline std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, md.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw NumericalError("SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

/// CLI11 config reader for JSON files. Top-level keys set global options, and
/// an object under a subcommand name sets that subcommand's options:
///   {"seed": 3, "fisher": {"family": "thermal", "N": 2}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames()[0];
      if (opt->count() > 0)
        j[name] = opt->results().size() == 1 ? json(opt->results()[0]) : json(opt->results());
      else if (default_also && !opt->get_default_str().empty())
        j[name] = opt->get_default_str();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return io::format_double(v.get<double>());
    return v.dump();
  }

  static void collect(const json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

/// Value of every option of `app` as it was finally resolved (flag, config
/// file or default), typed where the text parses as JSON.
inline json resolved_options(const CLI::App& app) {
  auto typed = [](const std::string& s) -> json {
    if (s.empty()) return nullptr;
    try {
      auto v = json::parse(s);
      if (v.is_number() || v.is_boolean()) return v;
    } catch (const json::exception&) {
    }
    return s;
  };
  json j = json::object();
  for (const CLI::Option* opt : app.get_options({})) {
    const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames()[0];
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_items_expected_max() <= 1 && r.size() == 1) {
        j[name] = typed(r[0]);
      } else {
        json arr = json::array();
        for (const auto& s : r) arr.push_back(typed(s));
        j[name] = arr;
      }
    } else {
      j[name] = typed(opt->get_default_str());
    }
  }
  return j;
}

/// Collects the outputs of one command in a directory and writes manifest.json
/// (resolved configuration, seed, toolkit version, content hashes) at the end.
class Run {
 public:
  Run(std::string command, const fs::path& out_dir, std::uint64_t seed, unsigned threads)
      : dir_(out_dir / command), command_(std::move(command)) {
    manifest_["tool"] = "pdisc";
    manifest_["version"] = PHOTON_DISCERNER_VERSION;
    manifest_["command"] = command_;
    manifest_["seed"] = seed;
    manifest_["threads"] = threads;
    manifest_["inputs"] = json::array();
    manifest_["artifacts"] = json::array();
    manifest_["checks"] = json::array();
    manifest_["flags"] = json::array();
    manifest_["results"] = json::object();
  }

  [[nodiscard]] const fs::path& dir() const { return dir_; }
  json& results() { return manifest_["results"]; }
  void set_config(json config) { manifest_["config"] = std::move(config); }

  void write(const std::string& name, std::string_view bytes) {
    io::write_file(dir_ / name, bytes);
    manifest_["artifacts"].push_back({{"file", name}, {"bytes", bytes.size()}, {"sha1", git_blob_sha1(bytes)}});
  }

  void input(const fs::path& path, std::string_view bytes) {
    manifest_["inputs"].push_back({{"file", path.string()}, {"sha1", git_blob_sha1(bytes)}});
  }

  /// A warning that does not invalidate the run.
  void note(const std::string& message) {
    std::cerr << "warning: " << message << '\n';
    manifest_["flags"].push_back({{"message", message}, {"fatal", false}});
  }

  /// A numerical failure: artifacts are still written, the exit status is 2.
  void fail(const std::string& message) {
    std::cerr << "error: " << message << '\n';
    manifest_["flags"].push_back({{"message", message}, {"fatal", true}});
    failed_ = true;
  }

  void check(const std::string& name, bool pass, const std::string& detail = "") {
    manifest_["checks"].push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    checks_ += name + ": " + (pass ? "pass" : "fail");
    if (!detail.empty()) checks_ += "  (" + detail + ")";
    checks_ += '\n';
    std::cout << name << ": " << (pass ? "pass" : "fail") << (detail.empty() ? "" : "  (" + detail + ")") << '\n';
    if (!pass) {
      std::cerr << "check failed: " << name << '\n';
      failed_ = true;
    }
  }

  int finish() {
    if (!checks_.empty()) write("checks.txt", checks_);
    io::write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n");
    std::cout << "artifacts in " << dir_.string() << '\n';
    return failed_ ? 2 : 0;
  }

 private:
  fs::path dir_;
  std::string command_;
  json manifest_;
  std::string checks_;
  bool failed_ = false;
};

}  // namespace pdisc::cli
