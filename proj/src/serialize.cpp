#include "blaircomp/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "blaircomp/errors.hpp"

namespace blaircomp {
namespace {

constexpr std::array<char, 8> kMagic{'B', 'L', 'A', 'I', 'R', 'C', 'M', 'P'};
constexpr std::uint64_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> buf;
  for (int k = 0; k < 8; ++k) buf[k] = char((v >> (8 * k)) & 0xff);
  out.write(buf.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> buf;
  if (!in.read(reinterpret_cast<char*>(buf.data()), 8))
    throw std::runtime_error("instance file truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t(buf[k]) << (8 * k);
  return v;
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void put_c(std::ostream& out, Complex c) {
  put_f64(out, c.real());
  put_f64(out, c.imag());
}
Complex get_c(std::istream& in) {
  const double re = get_f64(in);
  return {re, get_f64(in)};
}

void put_mat(std::ostream& out, const CMat& M) {
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) put_c(out, M(r, c));
}
CMat get_mat(std::istream& in, std::size_t rows, std::size_t cols) {
  CMat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = get_c(in);
  return M;
}

void put_vec(std::ostream& out, const CVec& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) put_c(out, v(k));
}
CVec get_vec(std::istream& in, std::size_t n) {
  CVec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = get_c(in);
  return v;
}

}  // namespace

void write_instance(std::ostream& out, const ProblemInstance& inst) {
  inst.validate();
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, kVersion);
  const auto& d = inst.dims;
  put_u64(out, d.s);
  put_u64(out, d.K);
  put_u64(out, d.N);
  put_u64(out, d.m);
  put_u64(out, inst.seed);
  put_f64(out, inst.meas.noise_variance);
  put_mat(out, inst.B.rows);
  for (const auto& Ai : inst.A.adjoint_rows) put_mat(out, Ai);
  for (std::size_t i = 0; i < d.s; ++i) {
    put_vec(out, inst.truth.h[i]);
    put_vec(out, inst.truth.x[i]);
    put_f64(out, inst.truth.q[i]);
  }
  put_f64(out, inst.truth.kappa);
  put_vec(out, inst.meas.y);
  put_u64(out, inst.access_flips ? 1 : 0);
  if (inst.access_flips) put_mat(out, *inst.access_flips);
  if (!out) throw std::runtime_error("failed to write instance");
}

ProblemInstance read_instance(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error("not a blaircomp instance file");
  if (const auto v = get_u64(in); v != kVersion)
    throw std::runtime_error("unsupported instance file version " + std::to_string(v));
  ProblemInstance inst;
  auto& d = inst.dims;
  d.s = get_u64(in);
  d.K = get_u64(in);
  d.N = get_u64(in);
  d.m = get_u64(in);
  inst.seed = get_u64(in);
  inst.meas.noise_variance = get_f64(in);
  inst.B.rows = get_mat(in, d.m, d.K);
  for (std::size_t i = 0; i < d.s; ++i) inst.A.adjoint_rows.push_back(get_mat(in, d.m, d.N));
  for (std::size_t i = 0; i < d.s; ++i) {
    inst.truth.h.push_back(get_vec(in, d.K));
    inst.truth.x.push_back(get_vec(in, d.N));
    inst.truth.q.push_back(get_f64(in));
  }
  inst.truth.kappa = get_f64(in);
  inst.meas.y = get_vec(in, d.m);
  if (get_u64(in) != 0) inst.access_flips = get_mat(in, d.s, d.m);
  inst.validate();
  return inst;
}

void save_instance(const std::filesystem::path& path, const ProblemInstance& inst) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_instance(out, inst);
}

ProblemInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_instance(in);
}

}  // namespace blaircomp
