#pragma once

#include <optional>
#include <map>
#include <string>
#include <vector>

#include "nlekit/asnet/asnet.hpp"
#include "nlekit/scenegen/scenegen.hpp"

/// Segment classification, recording-level voting and accuracy tables.
namespace nlekit::evalkit {

using divloss::Matrix;
using divloss::Vector;

struct RecordingPrediction {
  std::string id;
  std::size_t truth = 0;
  std::vector<std::size_t> segment_classes;
  std::vector<std::size_t> histogram;  // votes per class
  Vector summed;                       // summed T=1 posteriors
  std::size_t voted = 0;
};

/// Votes over per-segment argmax. Ties on vote count go to the larger summed
/// posterior mass, then to the lower class index. With `average_posteriors`
/// the vote is replaced by the argmax of the summed posteriors.
RecordingPrediction classify_recording(const Matrix& posteriors, bool average_posteriors = false);
RecordingPrediction classify_recording(asnet::Model& m, const diffcore::Tensor<float>& segments,
                                       bool average_posteriors = false);

struct DeviceResult {
  std::string device;
  std::size_t correct = 0;
  std::size_t count = 0;
  Matrix confusion;  // K x K, rows = truth, cols = voted

  double accuracy() const;  // percent
};

struct AccuracyReport {
  std::string name;  // row label, e.g. the regime
  std::size_t num_classes = 0;
  std::vector<DeviceResult> devices;
  std::string model_digest;
  std::string config_digest;

  const DeviceResult* find(const std::string& device) const;
};

struct EvalOptions {
  bool average_posteriors = false;
  unsigned workers = 1;
};

/// Scores precomputed T=1 segment posteriors (rows aligned with `data`).
AccuracyReport score(const Matrix& posteriors, const scenegen::SegmentSet& data, const std::string& name,
                     bool average_posteriors = false);

/// Per-device results over every recording in `data`, devices in first-seen
/// order. Deterministic for any worker count.
AccuracyReport evaluate(asnet::Model& m, const scenegen::SegmentSet& data, const std::string& name,
                        const EvalOptions& opts = {});
/// Loads the selected recordings first; an empty selection is a
/// configuration error.
AccuracyReport evaluate(asnet::Model& m, const scenegen::CorpusManifest& manifest, const scenegen::Filter& filter,
                        const std::string& name, const EvalOptions& opts = {});

/// Aligned text table: one row per report, one column per device; "-"
/// where a report has no result for that device.
std::string render_table(const std::vector<AccuracyReport>& reports, const std::vector<std::string>& devices);
/// Same layout from bare accuracies (e.g. means over seeds).
struct TableRow {
  std::string name;
  std::map<std::string, double> accuracy;  // device -> percent
};
std::string render_table(const std::vector<TableRow>& rows, const std::vector<std::string>& devices);
/// Tab-separated rows "name device accuracy n".
std::string render_tsv(const std::vector<AccuracyReport>& reports);

struct TsvRow {
  std::string name, device;
  double accuracy = 0.0;
  std::size_t count = 0;
};
std::vector<TsvRow> parse_tsv(const std::string& text);

/// One block per device: "# <name> <device>" then K tab-separated rows.
std::string render_confusion(const AccuracyReport& report);

}  // namespace nlekit::evalkit
