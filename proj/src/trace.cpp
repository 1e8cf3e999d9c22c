#include "aif/trace.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace aif {

std::vector<std::string> TraceLayout::header() const {
  std::vector<std::string> cols{"time"};
  auto add = [&](const std::string& prefix, int n) {
    for (int i = 0; i < n; ++i) cols.push_back(prefix + std::to_string(i));
  };
  add("q", n_p);
  add("s_p", n_p);
  add("s_v", n_v);
  add("mu", n_p);
  add("mu_prime", n_p);
  add("a", n_p);
  cols.emplace_back("F");
  add("target", 3);
  return cols;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace {

void put(std::ostream& os, const Vec& v, Eigen::Index n, bool valid = true) {
  for (Eigen::Index i = 0; i < n; ++i) {
    os << ',' << ((valid && i < v.size()) ? format_double(v[i]) : "nan");
  }
}

double parse_double(const std::string& cell) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
    throw ConfigError("trace csv: cannot parse '" + cell + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& os, const TraceLayout& layout, const std::vector<TraceRow>& rows) {
  const auto cols = layout.header();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << format_double(r.time);
    put(os, r.q, layout.n_p);
    put(os, r.s_p, layout.n_p);
    put(os, r.s_v, layout.n_v, r.s_v_valid);
    put(os, r.mu, layout.n_p);
    put(os, r.mu_prime, layout.n_p);
    put(os, r.action, layout.n_p);
    os << ',' << format_double(r.free_energy);
    put(os, r.target, 3);
    os << '\n';
  }
}

std::string trace_csv(const TraceLayout& layout, const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  write_trace_csv(os, layout, rows);
  return os.str();
}

std::vector<TraceRow> read_trace_csv(std::istream& is, TraceLayout& layout) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("trace csv: missing header");
  int n_p = 0;
  int n_v = 0;
  {
    std::istringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.rfind("q", 0) == 0 && col.size() > 1 && std::isdigit(static_cast<unsigned char>(col[1]))) ++n_p;
      if (col.rfind("s_v", 0) == 0) ++n_v;
    }
  }
  layout = {n_p, n_v};
  const auto expected = layout.header();
  {
    std::ostringstream joined;
    for (std::size_t i = 0; i < expected.size(); ++i) joined << (i ? "," : "") << expected[i];
    if (joined.str() != line) throw ConfigError("trace csv: unexpected header '" + line + "'");
  }

  std::vector<TraceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(parse_double(cell));
    if (cells.size() != expected.size()) throw ConfigError("trace csv: wrong number of columns");
    std::size_t k = 0;
    auto take = [&](int n) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v[i] = cells[k++];
      return v;
    };
    TraceRow r;
    r.time = cells[k++];
    r.q = take(n_p);
    r.s_p = take(n_p);
    r.s_v = take(n_v);
    r.s_v_valid = !r.s_v.hasNaN();
    r.mu = take(n_p);
    r.mu_prime = take(n_p);
    r.action = take(n_p);
    r.free_energy = cells[k++];
    r.target = take(3);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace aif
