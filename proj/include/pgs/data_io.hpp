#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgs/errors.hpp"
#include "pgs/field_recon.hpp"
#include "pgs/grid.hpp"
#include "pgs/pgs_opt.hpp"

namespace pgs::io {

/// Commented-JSON header of a snapshot file.
struct SnapshotHeader {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  std::string protocol = "";
  opt::ConstraintMask mask;
  std::string unit = "mm";
};

struct LoadedSnapshot {
  NodeGrid grid;
  opt::DisplacementSample sample;
  SnapshotHeader header;
};

namespace detail {

/// Shortest exact decimal: 17 significant digits round-trip for doubles.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view tok, const std::string& path, int line) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("bad numeric field '" + std::string(tok) + "'", path, line);
  }
  if (!std::isfinite(v)) {
    throw ParseError("non-finite value '" + std::string(tok) + "'", path, line);
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline nlohmann::json header_to_json(const SnapshotHeader& h, const std::string& schema) {
  return nlohmann::json{{"schema", schema}, {"version", 1},
                        {"nx", h.nx},       {"ny", h.ny},
                        {"dx", h.dx},       {"protocol", h.protocol},
                        {"mask_e11", h.mask.e11}, {"mask_e22", h.mask.e22},
                        {"unit", h.unit}};
}

inline SnapshotHeader header_from_json(const nlohmann::json& j, const std::string& path) {
  SnapshotHeader h;
  try {
    h.nx = j.at("nx").get<int>();
    h.ny = j.at("ny").get<int>();
    h.dx = j.at("dx").get<double>();
    h.protocol = j.at("protocol").get<std::string>();
    h.mask.e11 = j.at("mask_e11").get<bool>();
    h.mask.e22 = j.at("mask_e22").get<bool>();
    h.unit = j.value("unit", std::string("mm"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad snapshot header: ") + e.what(), path, 1);
  }
  if (h.nx < 1 || h.ny < 1 || !(h.dx > 0.0)) {
    throw ParseError("bad snapshot header: non-positive grid dims/spacing", path, 1);
  }
  return h;
}

struct ParsedTable {
  SnapshotHeader header;
  std::vector<Eigen::Vector2d> points;
  Eigen::MatrixXd values;  // one row per node, data columns only
};

inline ParsedTable parse_table(const std::filesystem::path& path,
                               const std::string& schema, int data_cols) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open snapshot", path.string());

  std::string line;
  int lineno = 0;

  // header line: "# {json}"
  if (!std::getline(in, line)) throw ParseError("empty file", path.string(), 0);
  ++lineno;
  const size_t brace = line.find('{');
  if (line.empty() || line[0] != '#' || brace == std::string::npos) {
    throw ParseError("missing '# {...}' header line", path.string(), lineno);
  }
  nlohmann::json hdr = nlohmann::json::parse(line.substr(brace), nullptr, false);
  if (hdr.is_discarded()) throw ParseError("unparseable header JSON", path.string(), lineno);
  if (hdr.value("schema", std::string()) != schema) {
    throw ParseError("expected schema '" + schema + "'", path.string(), lineno);
  }
  ParsedTable table;
  table.header = header_from_json(hdr, path.string());

  if (!std::getline(in, line)) throw ParseError("missing column header", path.string(), lineno);
  ++lineno;  // column names line, fixed by schema; not re-validated numerically

  const int n = table.header.nx * table.header.ny;
  table.points.reserve(n);
  table.values.resize(n, data_cols);
  int row = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (row >= n) throw ParseError("more rows than nx*ny", path.string(), lineno);
    const auto tok = split_csv(line);
    if (static_cast<int>(tok.size()) != 3 + data_cols) {
      throw ParseError("expected " + std::to_string(3 + data_cols) + " fields",
                       path.string(), lineno);
    }
    const double idx = parse_double(tok[0], path.string(), lineno);
    if (idx != row) {
      throw ParseError("node indices must be dense and sorted", path.string(), lineno);
    }
    table.points.emplace_back(parse_double(tok[1], path.string(), lineno),
                              parse_double(tok[2], path.string(), lineno));
    for (int c = 0; c < data_cols; ++c) {
      table.values(row, c) = parse_double(tok[3 + c], path.string(), lineno);
    }
    ++row;
  }
  if (row != n) {
    throw ParseError("row count " + std::to_string(row) + " != nx*ny = " + std::to_string(n),
                     path.string(), lineno);
  }
  return table;
}

inline void write_table(const std::filesystem::path& path, const SnapshotHeader& header,
                        const std::string& schema, const std::string& columns,
                        const std::vector<Eigen::Vector2d>& points,
                        const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write snapshot", path.string());
  out << "# " << header_to_json(header, schema).dump() << "\n";
  out << "index,x1,x2," << columns << "\n";
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    out << i << ',' << fmt(points[i].x()) << ',' << fmt(points[i].y());
    for (int c = 0; c < values.cols(); ++c) out << ',' << fmt(values(i, c));
    out << "\n";
  }
  if (!out) throw IoError("write failed", path.string());
}

/// Kernel-center grid spanning the bounding box of the measurement points.
inline void attach_kernel_centers(NodeGrid& grid, int rkx, int rky) {
  Eigen::Vector2d lo = grid.measurement_points.front();
  Eigen::Vector2d hi = lo;
  for (const auto& p : grid.measurement_points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  grid.kernel_centers.clear();
  grid.kernel_centers.reserve(static_cast<size_t>(rkx) * rky);
  for (int iy = 0; iy < rky; ++iy) {
    for (int ix = 0; ix < rkx; ++ix) {
      grid.kernel_centers.emplace_back(lo.x() + (hi.x() - lo.x()) * ix / (rkx - 1),
                                       lo.y() + (hi.y() - lo.y()) * iy / (rky - 1));
    }
  }
}

}  // namespace detail

inline void save_snapshot(const std::filesystem::path& path, const SnapshotHeader& header,
                          const NodeGrid& grid,
                          const Eigen::Matrix<double, Eigen::Dynamic, 2>& u) {
  if (static_cast<int>(grid.measurement_points.size()) != u.rows() ||
      u.rows() != header.nx * header.ny) {
    throw InvalidParameterError("save_snapshot: size mismatch");
  }
  detail::write_table(path, header, "pgs-snapshot", "u1,u2", grid.measurement_points, u);
}

/// Loads a snapshot and attaches a default kernel grid over the same
/// bounding box (RK centers are a processing choice, not stored in files).
inline LoadedSnapshot load_snapshot(const std::filesystem::path& path, int rkx = 10,
                                    int rky = 10) {
  auto table = detail::parse_table(path, "pgs-snapshot", 2);
  LoadedSnapshot snap;
  snap.header = table.header;
  snap.grid.dx = table.header.dx;
  snap.grid.measurement_points = std::move(table.points);
  detail::attach_kernel_centers(snap.grid, rkx, rky);
  snap.sample.u_exp = table.values;
  snap.sample.protocol_id = table.header.protocol;
  snap.sample.constraint_mask = table.header.mask;
  return snap;
}

/// Ground-truth table: displacements plus the analytic gradient columns.
struct TruthData {
  Eigen::Matrix<double, Eigen::Dynamic, 2> u;
  std::vector<Eigen::Matrix2d> grad;
};

inline void save_truth(const std::filesystem::path& path, const SnapshotHeader& header,
                       const NodeGrid& grid, const TruthData& truth) {
  const int n = static_cast<int>(grid.measurement_points.size());
  if (truth.u.rows() != n || static_cast<int>(truth.grad.size()) != n) {
    throw InvalidParameterError("save_truth: size mismatch");
  }
  Eigen::MatrixXd values(n, 6);
  for (int i = 0; i < n; ++i) {
    values(i, 0) = truth.u(i, 0);
    values(i, 1) = truth.u(i, 1);
    values(i, 2) = truth.grad[i](0, 0);
    values(i, 3) = truth.grad[i](0, 1);
    values(i, 4) = truth.grad[i](1, 0);
    values(i, 5) = truth.grad[i](1, 1);
  }
  detail::write_table(path, header, "pgs-truth", "u1,u2,g11,g12,g21,g22",
                      grid.measurement_points, values);
}

inline TruthData load_truth(const std::filesystem::path& path) {
  auto table = detail::parse_table(path, "pgs-truth", 6);
  TruthData truth;
  const int n = static_cast<int>(table.points.size());
  truth.u.resize(n, 2);
  truth.grad.resize(n);
  for (int i = 0; i < n; ++i) {
    truth.u(i, 0) = table.values(i, 0);
    truth.u(i, 1) = table.values(i, 1);
    truth.grad[i] << table.values(i, 2), table.values(i, 3), table.values(i, 4),
        table.values(i, 5);
  }
  return truth;
}

enum class TruthKind { affine, trig };

/// Smooth compressive bump u(x) = -A exp(-|x-c|^2/r^2) (x-c); its strain is
/// negative near the center once A clears the background stretch.
struct ArtifactSpec {
  Eigen::Vector2d center{0.5, 0.5};
  double radius = 0.22;
  double amplitude = 0.06;
};

struct SyntheticSpec {
  int nx = 21, ny = 21;
  int rkx = 10, rky = 10;
  double dx = 0.05;
  TruthKind kind = TruthKind::affine;
  double stretch1 = 0.01;  // affine: u = (s1*x1, s2*x2)
  double stretch2 = 0.01;
  double trig_amp = 0.01;  // trig: superimposed on the affine stretch
  double trig_freq = 3.0;  // rad per unit length
  double noise_sigma = 0.0;
  std::optional<ArtifactSpec> artifact;
  std::uint64_t seed = 0;
  std::string protocol_id = "synthetic";
  opt::ConstraintMask mask;

  void validate() const {
    if (nx < 2 || ny < 2) throw InvalidParameterError("SyntheticSpec: dims must be >= 2");
    if (dx <= 0.0) throw InvalidParameterError("SyntheticSpec: dx must be positive");
    if (noise_sigma < 0.0) throw InvalidParameterError("SyntheticSpec: sigma must be >= 0");
    if (artifact && artifact->radius <= 0.0) {
      throw InvalidParameterError("SyntheticSpec: artifact radius must be positive");
    }
  }
};

struct SyntheticData {
  NodeGrid grid;
  opt::DisplacementSample sample;  // truth + artifact + noise
  TruthData truth;                 // clean field, for error metrics
  SnapshotHeader header;
};

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  data.grid = make_node_grid(spec.nx, spec.ny, spec.dx, spec.rkx, spec.rky);
  data.header.nx = spec.nx;
  data.header.ny = spec.ny;
  data.header.dx = spec.dx;
  data.header.protocol = spec.protocol_id;
  data.header.mask = spec.mask;

  const int n = data.grid.num_points();
  data.truth.u.resize(n, 2);
  data.truth.grad.resize(n);
  data.sample.u_exp.resize(n, 2);
  data.sample.protocol_id = spec.protocol_id;
  data.sample.constraint_mask = spec.mask;

  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d x = data.grid.measurement_points[i];
    Eigen::Vector2d u{spec.stretch1 * x.x(), spec.stretch2 * x.y()};
    Eigen::Matrix2d g;
    g << spec.stretch1, 0.0, 0.0, spec.stretch2;
    if (spec.kind == TruthKind::trig) {
      const double k = spec.trig_freq;
      u.x() += spec.trig_amp * std::sin(k * x.x()) * std::cos(k * x.y());
      u.y() += spec.trig_amp * std::cos(k * x.x()) * std::sin(k * x.y());
      g(0, 0) += spec.trig_amp * k * std::cos(k * x.x()) * std::cos(k * x.y());
      g(0, 1) -= spec.trig_amp * k * std::sin(k * x.x()) * std::sin(k * x.y());
      g(1, 0) -= spec.trig_amp * k * std::sin(k * x.x()) * std::sin(k * x.y());
      g(1, 1) += spec.trig_amp * k * std::cos(k * x.x()) * std::cos(k * x.y());
    }
    data.truth.u.row(i) = u.transpose();
    data.truth.grad[i] = g;
    data.sample.u_exp.row(i) = u.transpose();
  }

  if (spec.artifact && spec.artifact->amplitude != 0.0) {
    const auto& art = *spec.artifact;
    const double r2 = art.radius * art.radius;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d d = data.grid.measurement_points[i] - art.center;
      const double bump = -art.amplitude * std::exp(-d.squaredNorm() / r2);
      data.sample.u_exp.row(i) += (bump * d).transpose();
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, spec.noise_sigma);
    for (int i = 0; i < n; ++i) {
      data.sample.u_exp(i, 0) += gauss(rng);
      data.sample.u_exp(i, 1) += gauss(rng);
    }
  }
  return data;
}

/// Resolution transfer through the continuous reconstruction: fit on the
/// source grid, evaluate at a new uniform lattice over the same bounding
/// box. Never pixel interpolation.
inline std::pair<NodeGrid, opt::DisplacementSample> resample(
    const NodeGrid& grid, const opt::DisplacementSample& sample, const rk::Params& params,
    int to_nx, int to_ny) {
  if (to_nx < 2 || to_ny < 2) {
    throw InvalidParameterError("resample: target dims must be >= 2 per axis");
  }
  const rk::RKBasis basis = rk::assemble_basis(grid, params.support, params.order,
                                               params.window);
  const recon::CoefficientField coeffs = opt::analytic_fit(basis, sample);

  Eigen::Vector2d lo = grid.measurement_points.front();
  Eigen::Vector2d hi = lo;
  for (const auto& p : grid.measurement_points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<size_t>(to_nx) * to_ny);
  for (int iy = 0; iy < to_ny; ++iy) {
    for (int ix = 0; ix < to_nx; ++ix) {
      pts.emplace_back(lo.x() + (hi.x() - lo.x()) * ix / (to_nx - 1),
                       lo.y() + (hi.y() - lo.y()) * iy / (to_ny - 1));
    }
  }
  const recon::DisplacementField field = recon::evaluate_at(coeffs, grid, params, pts);

  NodeGrid out;
  out.dx = (hi.x() - lo.x()) / (to_nx - 1);
  out.measurement_points = std::move(pts);
  out.kernel_centers = grid.kernel_centers;
  opt::DisplacementSample res;
  res.u_exp = field.u;
  res.protocol_id = sample.protocol_id;
  res.constraint_mask = sample.constraint_mask;
  return {std::move(out), std::move(res)};
}

struct FieldColumn {
  std::string name;
  Eigen::VectorXd values;
};

/// Writes a column-per-field CSV at `path` and a JSON summary
/// (min/max/fraction_negative per field) at `path` + ".summary.json".
inline void export_fields(const std::vector<Eigen::Vector2d>& points,
                          const std::vector<FieldColumn>& fields,
                          const std::filesystem::path& path) {
  if (fields.empty()) {
    throw InvalidParameterError("export_fields: empty field list");
  }
  const int n = static_cast<int>(points.size());
  for (const auto& f : fields) {
    if (f.values.size() != n) {
      throw InvalidParameterError("export_fields: field '" + f.name +
                                  "' length != point count");
    }
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write field export", path.string());
  out << "x1,x2";
  for (const auto& f : fields) out << ',' << f.name;
  out << "\n";
  for (int i = 0; i < n; ++i) {
    out << detail::fmt(points[i].x()) << ',' << detail::fmt(points[i].y());
    for (const auto& f : fields) out << ',' << detail::fmt(f.values(i));
    out << "\n";
  }
  if (!out) throw IoError("write failed", path.string());

  nlohmann::json summary;
  summary["count"] = n;
  for (const auto& f : fields) {
    const int neg = static_cast<int>((f.values.array() < 0.0).count());
    summary["fields"][f.name] = {{"min", f.values.minCoeff()},
                                 {"max", f.values.maxCoeff()},
                                 {"fraction_negative", n > 0 ? double(neg) / n : 0.0}};
  }
  const std::filesystem::path spath = path.string() + ".summary.json";
  std::ofstream sout(spath);
  if (!sout) throw IoError("cannot write summary", spath.string());
  sout << summary.dump(2) << "\n";
  if (!sout) throw IoError("write failed", spath.string());
}

}  // namespace pgs::io
