#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgs/errors.hpp"
#include "pgs/pgs_opt.hpp"

namespace pgs::io {

/// FNV-1a over the canonical (sorted-key) JSON dump, so the hash is stable
/// under key reordering in config files.
inline std::uint64_t config_hash(const nlohmann::json& config) {
  const std::string canon = config.dump();
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : canon) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct SampleRecord {
  std::string input;
  std::string status = "ok";  // "ok" or "error: ..."
  opt::PGSReport report;
  double neg_frac_before = 0.0;  // masked strain < -1e-6 at the warm start
  double neg_frac_after = 0.0;   // ... at the returned iterate
};

/// Deterministic run summary. Wall-clock timings deliberately live in a
/// sidecar file so reruns with the same seed/config are byte-identical.
struct RunManifest {
  std::string tool;
  nlohmann::json config;
  std::string config_hash_hex;
  std::vector<SampleRecord> samples;
};

inline nlohmann::json to_json(const SampleRecord& s) {
  return nlohmann::json{
      {"input", s.input},
      {"status", s.status},
      {"loss_u_initial", s.report.loss_u_initial},
      {"loss_e_initial", s.report.loss_e_initial},
      {"beta_effective", s.report.beta_effective},
      {"epochs_run", s.report.epochs_run},
      {"loss_u_final", s.report.loss_u_final},
      {"loss_e_final", s.report.loss_e_final},
      {"loss_u_last", s.report.loss_u_last},
      {"loss_e_last", s.report.loss_e_last},
      {"converged", s.report.converged},
      {"skipped", s.report.skipped},
      {"neg_frac_before", s.neg_frac_before},
      {"neg_frac_after", s.neg_frac_after}};
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  int n_failed = 0;
  int n_skipped = 0;
  int n_converged = 0;
  double before = 0.0, after = 0.0, ratio = 0.0;
  int n_ok = 0;
  for (const auto& s : m.samples) {
    samples.push_back(to_json(s));
    if (s.status != "ok") {
      ++n_failed;
      continue;
    }
    ++n_ok;
    if (s.report.skipped) ++n_skipped;
    if (s.report.converged) ++n_converged;
    before += s.neg_frac_before;
    after += s.neg_frac_after;
    ratio += s.report.loss_u_initial > 0.0
                 ? s.report.loss_u_final / s.report.loss_u_initial
                 : 1.0;
  }
  nlohmann::json aggregate = {
      {"samples", static_cast<int>(m.samples.size())},
      {"failed", n_failed},
      {"skipped", n_skipped},
      {"converged", n_converged},
      {"mean_neg_frac_before", n_ok ? before / n_ok : 0.0},
      {"mean_neg_frac_after", n_ok ? after / n_ok : 0.0},
      {"mean_loss_u_ratio", n_ok ? ratio / n_ok : 0.0}};
  return nlohmann::json{{"tool", m.tool},
                        {"config", m.config},
                        {"config_hash", m.config_hash_hex},
                        {"aggregate", aggregate},
                        {"samples", samples}};
}

inline void save_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest", path.string());
  out << to_json(m).dump(2) << "\n";
  if (!out) throw IoError("write failed", path.string());
}

inline nlohmann::json load_manifest_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest", path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError("unparseable manifest JSON", path.string(), 0);
  return j;
}

}  // namespace pgs::io
