#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aggterm/architectures.hpp"
#include "aggterm/models.hpp"
#include "aggterm/registry.hpp"
#include "aggterm/term.hpp"

namespace aggterm {

inline constexpr const char* kVersion = "1.0.0";

/// What a sweep evaluates: a closed term with its registry and dimensions.
struct Subject {
  TermPtr term;
  FunctionRegistry registry;
  int dim = 1;        // program dimension (features are zero-padded to it)
  int outputs = 1;    // leading coordinates recorded per sample
  std::string description;  // folded into the provenance hash

  static Subject from_term(TermPtr term, FunctionRegistry registry, int dim, std::string description = {});
  static Subject from_model(const CompiledModel& model, std::string description = {});
};

struct SweepConfig {
  Subject subject;
  GraphModelSpec model;
  FeatureDistSpec features;
  std::vector<int> sizes;
  int samples = 30;
  std::uint64_t seed = 0;
  std::optional<Vector> limit;
  int workers = 0;  // 0: hardware concurrency

  void validate() const;
};

struct SweepRow {
  int size = 0;
  int sample = 0;
  Vector output;
};

struct SizeSummary {
  int size = 0;
  Vector mean;
  Vector std;  // population standard deviation over samples
  std::optional<double> dist_to_limit;  // mean Euclidean distance of samples to the limit
};

struct ParityGap {
  double even_mean = 0;  // coordinate 0, over even sizes
  double odd_mean = 0;
  double gap = 0;
};

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version = kVersion;
};

struct SweepReport {
  int dim = 0;
  std::vector<SweepRow> rows;  // ordered by (size, sample)
  std::vector<SizeSummary> summary;
  std::optional<Vector> limit;
  std::optional<ParityGap> parity;
  Provenance provenance;
};

/// Evaluates the subject on samples x sizes independent graphs. Each
/// (size, sample) has its own random streams, so the result does not depend
/// on worker count or on which other sizes are in the sweep.
SweepReport run_sweep(const SweepConfig& config);

std::vector<SizeSummary> summarize(const std::vector<SweepRow>& rows, const std::optional<Vector>& limit);
ParityGap parity_gap(const std::vector<SweepRow>& rows);

/// Sweep under an alternating Erdos-Renyi schedule, with the even/odd gap.
SweepReport diverge_demo(const SweepConfig& config);

/// The closed term whose value is the share of nodes without neighbors.
TermPtr isolated_fraction_term();

std::uint64_t term_fingerprint(const Term& t);

void write_report_csv(std::ostream& out, const SweepReport& report);
void write_summary_csv(std::ostream& out, const SweepReport& report);
void write_plot_svg(std::ostream& out, const SweepReport& report);
void write_report_csv(const std::string& path, const SweepReport& report);
void write_summary_csv(const std::string& path, const SweepReport& report);
void write_plot_svg(const std::string& path, const SweepReport& report);

/// Rows back from a report CSV; summary recomputed from them.
SweepReport read_report_csv(std::istream& in, const std::optional<Vector>& limit = {});

/// %.17g
std::string format_real(double x);

}  // namespace aggterm
