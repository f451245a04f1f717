#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace twoplane {

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned i = 0; i < len; ++i) {
    out[2 * i] = hex[md[i] >> 4];
    out[2 * i + 1] = hex[md[i] & 15];
  }
  return out;
}

// Object keys come out sorted (std::map), doubles in shortest round-trip form.
inline std::string canonical_json(const nlohmann::json& j) { return j.dump(1) + "\n"; }

// Written next to the target and renamed over it, so a reader sees the old
// file or the new one, never half of either.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  auto tmp = path;
  tmp += ".tmp" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.flush()) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One row of a parameter sweep: named parameters, both sides of an inequality
// and whether it held.
struct SweepRow {
  std::vector<std::pair<std::string, double>> params;
  double lhs = 0.0;
  double rhs = 0.0;
  bool verdict = false;
  double ratio() const { return rhs != 0.0 ? lhs / rhs : std::numeric_limits<double>::quiet_NaN(); }
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out;
  if (rows.empty()) return "lhs,rhs,ratio,verdict\n";
  for (const auto& [name, v] : rows.front().params) out += name + ",";
  out += "lhs,rhs,ratio,verdict\n";
  for (const auto& r : rows) {
    if (r.params.size() != rows.front().params.size()) throw DomainError("sweep_csv: rows disagree on parameters");
    for (const auto& [name, v] : r.params) out += format_number(v) + ",";
    out += format_number(r.lhs) + "," + format_number(r.rhs) + "," + format_number(r.ratio()) + "," +
           (r.verdict ? "true" : "false") + "\n";
  }
  return out;
}

struct ReportEntry {
  std::string file;
  std::string command;
  std::string sha256;
  bool verdict = false;
};

// Content-addressed report files <command>-<16 hex>.<ext> in one directory.
// Safe to call from several workers; the manifest is sorted by file name so
// the tree does not depend on completion order.
class ReportWriter {
public:
  explicit ReportWriter(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  const std::filesystem::path& dir() const { return dir_; }

  ReportEntry write_json(const std::string& command, const nlohmann::json& body, bool verdict) {
    return write(command, "json", canonical_json(body), verdict);
  }
  ReportEntry write_csv(const std::string& command, const std::string& body, bool verdict) {
    return write(command, "csv", body, verdict);
  }

  std::vector<ReportEntry> entries() const {
    std::lock_guard lk(m_);
    auto e = entries_;
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.file < b.file; });
    return e;
  }

  bool all_passed() const {
    std::lock_guard lk(m_);
    return std::all_of(entries_.begin(), entries_.end(), [](const auto& e) { return e.verdict; });
  }

  nlohmann::json manifest() const {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& e : entries())
      files.push_back({{"file", e.file}, {"command", e.command}, {"sha256", e.sha256}, {"verdict", e.verdict}});
    return {{"files", files}, {"all_passed", all_passed()}};
  }

  void write_manifest() const { write_atomic(dir_ / "manifest.json", canonical_json(manifest())); }

private:
  ReportEntry write(const std::string& command, const std::string& ext, const std::string& body, bool verdict) {
    ReportEntry e{"", command, sha256_hex(body), verdict};
    e.file = command + "-" + e.sha256.substr(0, 16) + "." + ext;
    write_atomic(dir_ / e.file, body);
    std::lock_guard lk(m_);
    // identical content lands on the same name; keep one entry
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& x) { return x.file == e.file; });
    if (it == entries_.end()) entries_.push_back(e);
    return e;
  }

  std::filesystem::path dir_;
  mutable std::mutex m_;
  std::vector<ReportEntry> entries_;
};

} // namespace twoplane
