#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fosr/dataset.hpp"
#include "fosr/errors.hpp"
#include "fosr/loadings.hpp"
#include "fosr/mcmc_config.hpp"

namespace fosr {

static_assert(std::endian::native == std::endian::little,
              "archive format is little-endian");

// Retained posterior draws plus everything needed to interpret them:
// grid, standardized design, scaling record, and missing-cell bookkeeping.
struct DrawArchive {
  int n = 0, m = 0, p = 0, K = 0;
  McmcConfig config;
  Eigen::VectorXd tau;
  std::vector<std::string> predictor_names;
  Standardization scaling;                    // design standardization
  Eigen::MatrixXd X;                          // n x p, standardized
  std::vector<std::pair<int, int>> missing_cells;  // (subject, grid) pairs

  std::vector<Eigen::MatrixXd> F;           // m x K
  std::vector<Eigen::VectorXd> mu;          // K
  std::vector<Eigen::MatrixXd> A;           // K x p
  std::vector<Eigen::MatrixXd> Gamma;       // K x n
  std::vector<double> sigma_eps;
  std::vector<Eigen::MatrixXd> sigma_gamma;  // K x n scales
  std::vector<Eigen::VectorXd> y_missing;    // imputed values, missing_cells order

  int num_draws() const { return static_cast<int>(F.size()); }
};

inline void validate_archive(const DrawArchive& a) {
  const std::size_t S = a.F.size();
  if (a.mu.size() != S || a.A.size() != S || a.Gamma.size() != S ||
      a.sigma_eps.size() != S || a.sigma_gamma.size() != S || a.y_missing.size() != S)
    throw ValidationError("archive fields have unequal draw counts");
  if (static_cast<int>(S) != a.config.num_draws())
    throw ValidationError("archive draw count does not match (n_iter - burn_in)/thin");
  for (const auto& F : a.F)
    if (orthonormality_error(F) > 1e-8)
      throw ValidationError("archived loadings are not orthonormal");
}

namespace detail {

inline void write_doubles(const std::filesystem::path& path,
                          const std::vector<double>& buf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(const std::filesystem::path& path,
                                        std::size_t expect) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ValidationError("cannot open " + path.string());
  auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expect * sizeof(double))
    throw ValidationError("unexpected size of " + path.string());
  std::vector<double> buf(expect);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  return buf;
}

// Draw-major, row-major within each draw.
template <typename Mat>
inline std::vector<double> flatten(const std::vector<Mat>& draws) {
  std::vector<double> buf;
  if (draws.empty()) return buf;
  buf.reserve(draws.size() * draws[0].size());
  for (const auto& d : draws)
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = 0; j < d.cols(); ++j) buf.push_back(d(i, j));
  return buf;
}

}  // namespace detail

inline void save_archive(const DrawArchive& a, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int S = a.num_draws();

  detail::write_doubles(dir / "F.bin", detail::flatten(a.F));
  detail::write_doubles(dir / "mu.bin", detail::flatten(a.mu));
  detail::write_doubles(dir / "A.bin", detail::flatten(a.A));
  detail::write_doubles(dir / "Gamma.bin", detail::flatten(a.Gamma));
  detail::write_doubles(dir / "sigma_eps.bin", a.sigma_eps);
  detail::write_doubles(dir / "sigma_gamma.bin", detail::flatten(a.sigma_gamma));
  detail::write_doubles(dir / "y_missing.bin", detail::flatten(a.y_missing));

  std::vector<double> xbuf;
  xbuf.reserve(static_cast<std::size_t>(a.X.size()));
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.p; ++j) xbuf.push_back(a.X(i, j));
  detail::write_doubles(dir / "X.bin", xbuf);

  nlohmann::json man;
  man["format"] = "fosr-draw-archive";
  man["byte_order"] = "little";
  man["dtype"] = "float64";
  man["n"] = a.n;
  man["m"] = a.m;
  man["p"] = a.p;
  man["K"] = a.K;
  man["num_draws"] = S;
  man["seed"] = a.config.seed;
  man["config"] = config_to_json(a.config);
  man["tau"] = std::vector<double>(a.tau.data(), a.tau.data() + a.tau.size());
  man["predictor_names"] = a.predictor_names;
  man["scaling"] = {
      {"mean", std::vector<double>(a.scaling.mean.data(),
                                   a.scaling.mean.data() + a.scaling.mean.size())},
      {"sd", std::vector<double>(a.scaling.sd.data(),
                                 a.scaling.sd.data() + a.scaling.sd.size())}};
  nlohmann::json cells = nlohmann::json::array();
  for (auto& [i, l] : a.missing_cells) cells.push_back({i, l});
  man["missing_cells"] = cells;
  man["fields"] = {
      {{"name", "F"}, {"file", "F.bin"}, {"shape", {S, a.m, a.K}}},
      {{"name", "mu"}, {"file", "mu.bin"}, {"shape", {S, a.K}}},
      {{"name", "A"}, {"file", "A.bin"}, {"shape", {S, a.K, a.p}}},
      {{"name", "Gamma"}, {"file", "Gamma.bin"}, {"shape", {S, a.K, a.n}}},
      {{"name", "sigma_eps"}, {"file", "sigma_eps.bin"}, {"shape", {S}}},
      {{"name", "sigma_gamma"}, {"file", "sigma_gamma.bin"}, {"shape", {S, a.K, a.n}}},
      {{"name", "y_missing"},
       {"file", "y_missing.bin"},
       {"shape", {S, static_cast<int>(a.missing_cells.size())}}},
      {{"name", "X"}, {"file", "X.bin"}, {"shape", {a.n, a.p}}}};

  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw ValidationError("cannot write archive manifest");
  mf << man.dump(2) << "\n";
}

inline DrawArchive load_archive(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ValidationError("no archive manifest in " + dir.string());
  nlohmann::json man;
  try {
    mf >> man;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad archive manifest: ") + e.what());
  }
  if (man.value("format", "") != std::string("fosr-draw-archive"))
    throw ValidationError("not a draw archive: " + dir.string());

  DrawArchive a;
  a.n = man.at("n");
  a.m = man.at("m");
  a.p = man.at("p");
  a.K = man.at("K");
  const int S = man.at("num_draws");
  a.config = config_from_json(man.at("config"));
  std::vector<double> tau = man.at("tau").get<std::vector<double>>();
  a.tau = Eigen::Map<Eigen::VectorXd>(tau.data(), static_cast<int>(tau.size()));
  a.predictor_names = man.at("predictor_names").get<std::vector<std::string>>();
  auto mean = man.at("scaling").at("mean").get<std::vector<double>>();
  auto sd = man.at("scaling").at("sd").get<std::vector<double>>();
  a.scaling.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<int>(mean.size()));
  a.scaling.sd = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<int>(sd.size()));
  for (const auto& c : man.at("missing_cells"))
    a.missing_cells.emplace_back(c.at(0).get<int>(), c.at(1).get<int>());

  auto unflatten = [&](const std::string& file, int rows, int cols) {
    auto buf = detail::read_doubles(dir / file,
                                    static_cast<std::size_t>(S) * rows * cols);
    std::vector<Eigen::MatrixXd> out(S, Eigen::MatrixXd(rows, cols));
    std::size_t idx = 0;
    for (int s = 0; s < S; ++s)
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out[s](i, j) = buf[idx++];
    return out;
  };

  a.F = unflatten("F.bin", a.m, a.K);
  a.A = unflatten("A.bin", a.K, a.p);
  a.Gamma = unflatten("Gamma.bin", a.K, a.n);
  a.sigma_gamma = unflatten("sigma_gamma.bin", a.K, a.n);
  {
    auto buf = detail::read_doubles(dir / "mu.bin", static_cast<std::size_t>(S) * a.K);
    a.mu.assign(S, Eigen::VectorXd(a.K));
    for (int s = 0; s < S; ++s)
      for (int k = 0; k < a.K; ++k) a.mu[s][k] = buf[s * a.K + k];
  }
  a.sigma_eps = detail::read_doubles(dir / "sigma_eps.bin", S);
  {
    const int c = static_cast<int>(a.missing_cells.size());
    auto buf = detail::read_doubles(dir / "y_missing.bin",
                                    static_cast<std::size_t>(S) * c);
    a.y_missing.assign(S, Eigen::VectorXd(c));
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < c; ++j) a.y_missing[s][j] = buf[s * c + j];
  }
  {
    auto buf = detail::read_doubles(dir / "X.bin",
                                    static_cast<std::size_t>(a.n) * a.p);
    a.X.resize(a.n, a.p);
    for (int i = 0; i < a.n; ++i)
      for (int j = 0; j < a.p; ++j) a.X(i, j) = buf[i * a.p + j];
  }
  validate_archive(a);
  return a;
}

// Pool retained draws of several chains run on the same data.
inline DrawArchive merge_archives(std::vector<DrawArchive> chains) {
  if (chains.empty()) throw ValidationError("no archives to merge");
  DrawArchive out = std::move(chains[0]);
  for (std::size_t c = 1; c < chains.size(); ++c) {
    DrawArchive& a = chains[c];
    if (a.n != out.n || a.m != out.m || a.p != out.p || a.K != out.K)
      throw ValidationError("cannot merge archives with different shapes");
    auto append = [](auto& dst, auto& src) {
      dst.insert(dst.end(), std::make_move_iterator(src.begin()),
                 std::make_move_iterator(src.end()));
    };
    append(out.F, a.F);
    append(out.mu, a.mu);
    append(out.A, a.A);
    append(out.Gamma, a.Gamma);
    append(out.sigma_eps, a.sigma_eps);
    append(out.sigma_gamma, a.sigma_gamma);
    append(out.y_missing, a.y_missing);
  }
  // Keep (n_iter - burn_in)/thin equal to the pooled draw count so the
  // merged archive still validates and round-trips through disk.
  out.config.n_iter =
      out.config.burn_in + out.config.thin * static_cast<int>(out.F.size());
  return out;
}

}  // namespace fosr
