#pragma once

#include "aif/kinematics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace aif {

/// One control cycle. CSV column order: time, q..., s_p..., s_v..., mu...,
/// mu_prime..., a..., F, target... . Invalid visual readings are written as nan.
struct TraceRow {
  double time = 0.0;
  Vec q;
  Vec s_p;
  Vec s_v;
  bool s_v_valid = true;
  Vec mu;
  Vec mu_prime;
  Vec action;
  double free_energy = 0.0;
  Vec3 target = Vec3::Zero();
};

struct TraceLayout {
  int n_p = 0;
  int n_v = 0;

  std::vector<std::string> header() const;
};

/// Shortest round-trip decimal form; identical doubles give identical bytes.
std::string format_double(double v);

void write_trace_csv(std::ostream& os, const TraceLayout& layout, const std::vector<TraceRow>& rows);
std::string trace_csv(const TraceLayout& layout, const std::vector<TraceRow>& rows);

/// Parses a CSV produced by write_trace_csv. Throws ConfigError on malformed input.
std::vector<TraceRow> read_trace_csv(std::istream& is, TraceLayout& layout);

}  // namespace aif
