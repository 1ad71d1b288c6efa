#include "nlekit/evalkit/evalkit.hpp"

#include <cstdio>
#include <sstream>

namespace nlekit::evalkit {

RecordingPrediction classify_recording(const Matrix& post, bool average) {
  if (post.rows() == 0) fail(ErrorKind::input, "classify_recording: no segments");
  const auto k = static_cast<std::size_t>(post.cols());
  RecordingPrediction r;
  r.histogram.assign(k, 0);
  r.summed = post.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    Eigen::Index arg;
    post.row(i).maxCoeff(&arg);  // first maximum, so lower index on exact ties
    r.segment_classes.push_back(static_cast<std::size_t>(arg));
    ++r.histogram[static_cast<std::size_t>(arg)];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c), bi = static_cast<Eigen::Index>(best);
    if (average) {
      if (r.summed(ci) > r.summed(bi)) best = c;
    } else if (r.histogram[c] > r.histogram[best] ||
               (r.histogram[c] == r.histogram[best] && r.summed(ci) > r.summed(bi))) {
      best = c;
    }
  }
  r.voted = best;
  return r;
}

RecordingPrediction classify_recording(asnet::Model& m, const diffcore::Tensor<float>& segments, bool average) {
  if (segments.empty()) fail(ErrorKind::input, "classify_recording: no segments");
  return classify_recording(asnet::infer_posteriors(m, segments, 1.0), average);
}

double DeviceResult::accuracy() const {
  return count == 0 ? 0.0 : 100.0 * confusion.trace() / confusion.sum();
}

const DeviceResult* AccuracyReport::find(const std::string& device) const {
  for (const auto& d : devices)
    if (d.device == device) return &d;
  return nullptr;
}

AccuracyReport score(const Matrix& post, const scenegen::SegmentSet& data, const std::string& name, bool average) {
  if (data.size() == 0) fail(ErrorKind::config, "evaluate: empty selection");
  if (static_cast<std::size_t>(post.rows()) != data.size() || static_cast<std::size_t>(post.cols()) != data.num_classes)
    fail(ErrorKind::input, "score: posteriors do not match the segment set");
  const std::size_t k = data.num_classes;
  AccuracyReport rep;
  rep.name = name;
  rep.num_classes = k;
  // Segments of a recording are contiguous in a SegmentSet.
  std::size_t i = 0;
  while (i < data.size()) {
    std::size_t j = i;
    while (j < data.size() && data.recording[j] == data.recording[i]) ++j;
    const auto pred =
        classify_recording(post.middleRows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - i)), average);
    const auto& entry = data.entries[data.recording[i]];
    DeviceResult* dev = nullptr;
    for (auto& d : rep.devices)
      if (d.device == entry.device_id) dev = &d;
    if (!dev) {
      rep.devices.push_back({entry.device_id, 0, 0, Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))});
      dev = &rep.devices.back();
    }
    const std::size_t truth = data.labels[i];
    dev->confusion(static_cast<Eigen::Index>(truth), static_cast<Eigen::Index>(pred.voted)) += 1.0;
    dev->correct += pred.voted == truth;
    ++dev->count;
    i = j;
  }
  return rep;
}

AccuracyReport evaluate(asnet::Model& m, const scenegen::SegmentSet& data, const std::string& name,
                        const EvalOptions& opts) {
  if (data.size() == 0) fail(ErrorKind::config, "evaluate: empty selection");
  if (data.num_classes != m.config.num_classes)
    fail(ErrorKind::config, "evaluate: data has K=" + std::to_string(data.num_classes) + ", model has K=" +
                                std::to_string(m.config.num_classes));
  AccuracyReport rep = score(asnet::infer_posteriors(m, data.inputs, 1.0, 256, opts.workers), data, name,
                             opts.average_posteriors);
  rep.model_digest = asnet::model_digest(m);
  return rep;
}

AccuracyReport evaluate(asnet::Model& m, const scenegen::CorpusManifest& manifest, const scenegen::Filter& filter,
                        const std::string& name, const EvalOptions& opts) {
  scenegen::LoadOptions lo;
  lo.seg_len = m.config.input_frames;
  lo.workers = opts.workers;
  return evaluate(m, scenegen::load_split(manifest, filter, lo), name, opts);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w, bool left) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

}  // namespace

std::string render_table(const std::vector<AccuracyReport>& reports, const std::vector<std::string>& devices) {
  std::vector<TableRow> rows;
  for (const auto& r : reports) {
    TableRow t{r.name, {}};
    for (const auto& d : r.devices) t.accuracy[d.device] = d.accuracy();
    rows.push_back(std::move(t));
  }
  return render_table(rows, devices);
}

std::string render_table(const std::vector<TableRow>& rows, const std::vector<std::string>& devices) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"model"};
  for (const auto& d : devices) head.push_back("Dev " + d + " acc.(%)");
  cells.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> row{r.name};
    for (const auto& d : devices) {
      const auto it = r.accuracy.find(d);
      row.push_back(it != r.accuracy.end() ? fmt("%.1f", it->second) : "-");
    }
    cells.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) os << (c ? "  " : "") << pad(cells[r][c], width[c], c == 0);
    os << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    }
  }
  return os.str();
}

std::string render_tsv(const std::vector<AccuracyReport>& reports) {
  std::ostringstream os;
  os << "name\tdevice\taccuracy\tn\n";
  for (const auto& r : reports)
    for (const auto& d : r.devices) os << r.name << "\t" << d.device << "\t" << fmt("%.17g", d.accuracy()) << "\t" << d.count << "\n";
  return os.str();
}

std::vector<TsvRow> parse_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<TsvRow> out;
  if (!std::getline(in, line) || line != "name\tdevice\taccuracy\tn") fail(ErrorKind::data, "report TSV: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream f(line);
    TsvRow r;
    std::string acc, n;
    if (!std::getline(f, r.name, '\t') || !std::getline(f, r.device, '\t') || !std::getline(f, acc, '\t') ||
        !std::getline(f, n))
      fail(ErrorKind::data, "report TSV: malformed row '" + line + "'");
    try {
      r.accuracy = std::stod(acc);
      r.count = std::stoull(n);
    } catch (const std::exception&) {
      fail(ErrorKind::data, "report TSV: malformed number in '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

std::string render_confusion(const AccuracyReport& report) {
  std::ostringstream os;
  for (const auto& d : report.devices) {
    os << "# " << report.name << " " << d.device << "\n";
    for (Eigen::Index i = 0; i < d.confusion.rows(); ++i) {
      for (Eigen::Index j = 0; j < d.confusion.cols(); ++j) os << (j ? "\t" : "") << static_cast<long long>(d.confusion(i, j));
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace nlekit::evalkit
