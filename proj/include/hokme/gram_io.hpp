#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/format.hpp"
#include "hokme/sigkernel.hpp"

namespace hokme {

// Binary layout (little-endian host order):
//   "HOKMEGF1" | int64 m, n, P, Q | P doubles s_times | Q doubles t_times | m*n*P*Q doubles,
// values ordered by (i, j, p, q) with q fastest.
inline constexpr char gram_magic[8] = {'H', 'O', 'K', 'M', 'E', 'G', 'F', '1'};

inline void write_gram_binary(std::ostream& out, const GramField& g) {
  out.write(gram_magic, sizeof(gram_magic));
  const std::int64_t header[4] = {g.rows(), g.cols(), g.grid_rows(), g.grid_cols()};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  auto put = [&out](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  put(g.s_times());
  put(g.t_times());
  put(g.data());
  if (!out) throw ValidationError("failed to write Gram field");
}

inline GramField read_gram_binary(std::istream& in) {
  char magic[sizeof(gram_magic)];
  in.read(magic, sizeof(magic));
  require(in && std::memcmp(magic, gram_magic, sizeof(magic)) == 0, "not a binary Gram field (bad magic)");
  std::int64_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  require(static_cast<bool>(in), "truncated Gram field header");
  for (std::int64_t h : header) require(h >= 1 && h < (std::int64_t{1} << 31), "invalid Gram field dimensions");
  auto get = [&in](std::size_t count) {
    std::vector<double> v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    require(static_cast<bool>(in), "truncated Gram field data");
    return v;
  };
  std::vector<double> s = get(static_cast<std::size_t>(header[2]));
  std::vector<double> t = get(static_cast<std::size_t>(header[3]));
  GramField g(header[0], header[1], std::move(s), std::move(t));
  g.data() = get(g.data().size());
  return g;
}

// CSV layout:
//   m,n,P,Q
//   <m>,<n>,<P>,<Q>
//   s_times,<P values>
//   t_times,<Q values>
//   i,j,p,q,value
//   one row per entry
inline void write_gram_csv(std::ostream& out, const GramField& g) {
  out << "m,n,P,Q\n" << g.rows() << ',' << g.cols() << ',' << g.grid_rows() << ',' << g.grid_cols() << '\n';
  out << "s_times";
  for (double v : g.s_times()) out << ',' << format_double(v);
  out << "\nt_times";
  for (double v : g.t_times()) out << ',' << format_double(v);
  out << "\ni,j,p,q,value\n";
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (Eigen::Index p = 0; p < g.grid_rows(); ++p)
        for (Eigen::Index q = 0; q < g.grid_cols(); ++q)
          out << i << ',' << j << ',' << p << ',' << q << ',' << format_double(g(i, j, p, q)) << '\n';
  if (!out) throw ValidationError("failed to write Gram field");
}

namespace detail {
inline std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

inline double csv_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    require(used == s.size(), "bad number '" + s + "' in Gram CSV");
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("bad number '" + s + "' in Gram CSV");
  }
}
}  // namespace detail

inline GramField read_gram_csv(std::istream& in) {
  std::string line;
  require(std::getline(in, line) && line == "m,n,P,Q", "Gram CSV must start with 'm,n,P,Q'");
  require(static_cast<bool>(std::getline(in, line)), "Gram CSV is missing its dimensions");
  const auto dims = detail::csv_fields(line);
  require(dims.size() == 4, "Gram CSV dimension line needs four fields");
  Eigen::Index d[4];
  for (int k = 0; k < 4; ++k) {
    const double v = detail::csv_number(dims[static_cast<std::size_t>(k)]);
    require(v >= 1 && v == std::floor(v), "Gram CSV dimensions must be positive integers");
    d[k] = static_cast<Eigen::Index>(v);
  }
  auto times = [&](const char* label, Eigen::Index count) {
    require(static_cast<bool>(std::getline(in, line)), std::string("Gram CSV is missing ") + label);
    const auto f = detail::csv_fields(line);
    require(!f.empty() && f[0] == label && static_cast<Eigen::Index>(f.size()) == count + 1,
            std::string("malformed ") + label + " line in Gram CSV");
    std::vector<double> v;
    for (std::size_t k = 1; k < f.size(); ++k) v.push_back(detail::csv_number(f[k]));
    return v;
  };
  std::vector<double> s = times("s_times", d[2]);
  std::vector<double> t = times("t_times", d[3]);
  require(std::getline(in, line) && line == "i,j,p,q,value", "Gram CSV is missing the entry header");
  GramField g(d[0], d[1], std::move(s), std::move(t));
  std::vector<char> seen(g.data().size(), 0);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::csv_fields(line);
    require(f.size() == 5, "Gram CSV entry rows need five fields");
    Eigen::Index idx[4];
    for (int k = 0; k < 4; ++k) {
      const double v = detail::csv_number(f[static_cast<std::size_t>(k)]);
      require(v >= 0 && v < static_cast<double>(d[k]) && v == std::floor(v), "Gram CSV index out of range");
      idx[k] = static_cast<Eigen::Index>(v);
    }
    const auto flat = static_cast<std::size_t>(((idx[0] * d[1] + idx[1]) * d[2] + idx[2]) * d[3] + idx[3]);
    require(!seen[flat], "duplicate Gram CSV entry");
    seen[flat] = 1;
    g(idx[0], idx[1], idx[2], idx[3]) = detail::csv_number(f[4]);
    ++count;
  }
  require(count == g.data().size(), "Gram CSV has missing entries");
  return g;
}

}  // namespace hokme
