#include "qcseg/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qcseg/error.hpp"
#include "qcseg/rng.hpp"

namespace qcseg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Provenance::line() const { return fmt::format("# qcseg config={} seed={}", config_hash, seed); }

std::string config_hash(const json& config) {
  // nlohmann's object type is a std::map, so dump() is already key-sorted.
  return fmt::format("{:016x}", fnv1a64(config.dump()));
}

std::string format_double(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{:.17g}", v);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                      : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::Format, where + ": '" + s + "' is not a number");
  }
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

Adherence parse_label(double v, const std::string& where) {
  if (v == 1.0) return Adherence::Adherence;
  if (v == 2.0) return Adherence::Violation;
  throw Error(ErrorCode::Format, where + ": label must be 1 or 2");
}

double rate_from_times(const std::vector<double>& t, const fs::path& path) {
  if (t.size() < 2) throw Error(ErrorCode::TooFewSamples, "'" + path.string() + "' needs at least 2 rows");
  const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(step > 0.0)) throw Error(ErrorCode::NonMonotonicTimestamps, "'" + path.string() + "' has no time span");
  double rate = 1.0 / step;
  // Written timestamps are t0 + i / rate; snap the rounding back off.
  const double rounded = std::round(rate * 1e6) / 1e6;
  if (std::abs(rate - rounded) < 1e-9 * rate) rate = rounded;
  return rate;
}

}  // namespace

bool CsvTable::has(const std::string& column) const {
  return std::find(columns.begin(), columns.end(), column) != columns.end();
}

std::size_t CsvTable::index(const std::string& column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw Error(ErrorCode::Format, "missing column '" + column + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> CsvTable::numeric(const std::string& column) const {
  const std::size_t c = index(column);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.push_back(parse_double(rows[r][c], "row " + std::to_string(r + 1) + ", column '" + column + "'"));
  }
  return out;
}

std::vector<std::string> CsvTable::text(const std::string& column) const {
  const std::size_t c = index(column);
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split(t);
    if (!header) {
      table.columns = std::move(cells);
      header = true;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw Error(ErrorCode::Format, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(table.columns.size()) + " fields, found " +
                                         std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!header) throw Error(ErrorCode::Format, "'" + path.string() + "' has no header row");
  return table;
}

void write_csv(const fs::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& data, const Provenance& provenance) {
  if (columns.size() != data.size()) throw Error(ErrorCode::InvalidArgument, "column count mismatch");
  const std::size_t n = data.empty() ? 0 : data.front().size();
  for (const auto& c : data) {
    if (c.size() != n) throw Error(ErrorCode::InvalidArgument, "columns differ in length");
  }
  auto out = open_out(path);
  out << provenance.line() << '\n';
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  std::string row;
  for (std::size_t r = 0; r < n; ++r) {
    row.clear();
    for (std::size_t c = 0; c < data.size(); ++c) {
      if (c) row += ',';
      row += format_double(data[c][r]);
    }
    row += '\n';
    out << row;
  }
  check_written(out, path);
}

TimestampedTriaxial read_triaxial(const fs::path& path) {
  const CsvTable t = read_csv(path);
  TimestampedTriaxial out;
  out.timestamps = t.numeric("t");
  const auto x = t.numeric("x"), y = t.numeric("y"), z = t.numeric("z");
  out.samples.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.samples.push_back({x[i], y[i], z[i]});
  return out;
}

void write_triaxial(const fs::path& path, const TimestampedTriaxial& data, const Provenance& p) {
  std::vector<std::vector<double>> cols(4);
  cols[0] = data.timestamps;
  for (const auto& s : data.samples) {
    for (int a = 0; a < 3; ++a) cols[static_cast<std::size_t>(a + 1)].push_back(s[static_cast<std::size_t>(a)]);
  }
  write_csv(path, {"t", "x", "y", "z"}, cols, p);
}

TimedSeries read_scalar(const fs::path& path, ScalarUnit unit) {
  const CsvTable t = read_csv(path);
  TimedSeries out;
  out.times = t.numeric("t");
  out.series.values = t.numeric("v");
  out.series.unit = unit;
  out.series.rate = rate_from_times(out.times, path);
  return out;
}

void write_scalar(const fs::path& path, const std::vector<double>& times, const ScalarSeries& series,
                  const Provenance& p) {
  write_csv(path, {"t", "v"}, {times, series.values}, p);
}

TimedLabels read_labels(const fs::path& path) {
  const CsvTable t = read_csv(path);
  TimedLabels out;
  out.times = t.numeric("t");
  const auto u = t.numeric("u");
  for (std::size_t i = 0; i < u.size(); ++i) out.labels.push_back(parse_label(u[i], path.string()));
  if (t.has("confidence")) out.confidence = t.numeric("confidence");
  return out;
}

void write_labels(const fs::path& path, const std::vector<double>& times, const AdherenceLabels& labels,
                  const std::vector<double>& confidence, const Provenance& p) {
  std::vector<double> u;
  u.reserve(labels.size());
  for (auto l : labels) u.push_back(static_cast<double>(static_cast<int>(l)));
  if (confidence.empty()) {
    write_csv(path, {"t", "u"}, {times, u}, p);
  } else {
    write_csv(path, {"t", "u", "confidence"}, {times, u, confidence}, p);
  }
}

TimedStates read_states(const fs::path& path) {
  const CsvTable t = read_csv(path);
  TimedStates out;
  out.times = t.numeric("t");
  for (double z : t.numeric("z")) {
    if (z < 1.0 || z != std::floor(z)) throw Error(ErrorCode::Format, path.string() + ": state ids are integers >= 1");
    out.states.indicators.push_back(static_cast<int>(z) - 1);
  }
  return out;
}

void write_states(const fs::path& path, const std::vector<double>& times, const StateSequence& z,
                  const Provenance& p) {
  std::vector<double> ids;
  ids.reserve(z.size());
  for (int s : z.indicators) ids.push_back(static_cast<double>(s + 1));
  write_csv(path, {"t", "z"}, {times, ids}, p);
}

void read_posteriors(const fs::path& path, StateSequence& z) {
  const CsvTable t = read_csv(path);
  if (t.rows.size() != z.size()) {
    throw Error(ErrorCode::Format, path.string() + ": posterior rows do not match the state sequence");
  }
  std::vector<std::vector<double>> cols;
  for (std::size_t k = 1;; ++k) {
    const std::string name = "p" + std::to_string(k);
    if (!t.has(name)) break;
    cols.push_back(t.numeric(name));
  }
  if (cols.empty()) throw Error(ErrorCode::Format, path.string() + ": no posterior columns p1..pL");
  z.posteriors.assign(z.size(), std::vector<double>(cols.size()));
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t k = 0; k < cols.size(); ++k) z.posteriors[i][k] = cols[k][i];
  }
}

void write_posteriors(const fs::path& path, const std::vector<double>& times, const StateSequence& z,
                      const Provenance& p) {
  if (z.posteriors.size() != z.size() || z.posteriors.empty()) {
    throw Error(ErrorCode::InvalidArgument, "state sequence carries no posterior rows");
  }
  const std::size_t l = z.posteriors.front().size();
  std::vector<std::string> names{"t"};
  std::vector<std::vector<double>> cols{times};
  for (std::size_t k = 0; k < l; ++k) {
    names.push_back("p" + std::to_string(k + 1));
    std::vector<double> col;
    col.reserve(z.size());
    for (const auto& row : z.posteriors) col.push_back(row[k]);
    cols.push_back(std::move(col));
  }
  write_csv(path, names, cols, p);
}

void write_spectrum(const fs::path& path, const SpectrumEstimate& s, const Provenance& p) {
  write_csv(path, {"f", "power"}, {s.frequencies, s.power}, p);
}

void write_decomposition(const fs::path& path, const std::vector<double>& times, const std::vector<Vec3>& gravity,
                         const std::vector<Vec3>& dynamic, const Provenance& p) {
  std::vector<std::vector<double>> cols(7);
  cols[0] = times;
  for (std::size_t i = 0; i < gravity.size(); ++i) {
    for (std::size_t a = 0; a < 3; ++a) {
      cols[1 + a].push_back(gravity[i][a]);
      cols[4 + a].push_back(dynamic[i][a]);
    }
  }
  write_csv(path, {"t", "gx", "gy", "gz", "dx", "dy", "dz"}, cols, p);
}

void write_schedule(const fs::path& path, const TruthSchedule& truth, const Provenance& p) {
  auto out = open_out(path);
  out << p.line() << '\n' << "start,end,state,u,behaviour\n";
  for (const auto& s : truth.schedule) {
    const auto k = static_cast<std::size_t>(s.state);
    const std::string u =
        k < truth.adherence.size() ? std::to_string(static_cast<int>(truth.adherence[k])) : std::string{};
    const std::string b = k < truth.behaviours.size() ? truth.behaviours[k] : std::string{};
    out << format_double(s.start) << ',' << format_double(s.end) << ',' << (s.state + 1) << ',' << u << ','
        << b << '\n';
  }
  check_written(out, path);
}

TruthSchedule read_schedule(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto start = t.numeric("start"), end = t.numeric("end"), state = t.numeric("state");
  const auto u = t.text("u");
  const auto b = t.has("behaviour") ? t.text("behaviour") : std::vector<std::string>(t.rows.size());
  TruthSchedule out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (state[i] < 1.0) throw Error(ErrorCode::Format, path.string() + ": state ids are >= 1");
    const int s = static_cast<int>(state[i]) - 1;
    out.schedule.push_back({s, start[i], end[i]});
    const auto k = static_cast<std::size_t>(s);
    if (out.behaviours.size() <= k) {
      out.behaviours.resize(k + 1);
      out.adherence.resize(k + 1, Adherence::Violation);
    }
    out.behaviours[k] = b[i];
    if (!u[i].empty()) out.adherence[k] = parse_label(parse_double(u[i], path.string()), path.string());
  }
  if (out.schedule.empty()) throw Error(ErrorCode::EmptyInput, "'" + path.string() + "' has no segments");
  return out;
}

AdherenceLabels read_truth_at(const fs::path& path, const std::vector<double>& times) {
  const CsvTable head = read_csv(path);
  AdherenceLabels out;
  out.reserve(times.size());
  if (head.has("start")) {
    const TruthSchedule truth = read_schedule(path);
    for (double t : times) out.push_back(truth.adherence.at(static_cast<std::size_t>(state_at(truth.schedule, t))));
    return out;
  }
  const TimedLabels labels = read_labels(path);
  if (labels.times.empty()) throw Error(ErrorCode::EmptyInput, "'" + path.string() + "' has no labels");
  for (double t : times) {
    auto it = std::upper_bound(labels.times.begin(), labels.times.end(), t + 1e-9);
    const std::size_t i = it == labels.times.begin() ? 0 : static_cast<std::size_t>(it - labels.times.begin()) - 1;
    out.push_back(labels.labels[i]);
  }
  return out;
}

namespace {

json header(const char* type) { return json{{"format", "qcseg"}, {"version", kFormatVersion}, {"type", type}}; }

void expect_type(const json& j, const char* type) {
  if (!j.is_object() || j.value("format", "") != "qcseg") {
    throw Error(ErrorCode::Format, "not a qcseg document");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw Error(ErrorCode::Format, "unsupported document version " + std::to_string(j.value("version", 0)));
  }
  if (j.value("type", "") != type) {
    throw Error(ErrorCode::Format, std::string("expected a ") + type + " document, found '" +
                                       j.value("type", std::string{}) + "'");
  }
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::Format, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("field '") + key + "': " + e.what());
  }
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const SwitchingArModel& m) {
  json j = header("switching-ar");
  j["order"] = m.order;
  j["truncation"] = m.truncation;
  j["alpha"] = m.alpha;
  j["gamma"] = m.gamma;
  j["kappa"] = m.kappa;
  j["sampler_seed"] = m.seed;
  j["beta"] = m.beta;
  j["transition"] = m.transition;
  j["prior"] = {{"center", m.prior.center},
                {"coef_variance", m.prior.coef_variance},
                {"intercept_variance", m.prior.intercept_variance},
                {"shape", m.prior.shape},
                {"scale", m.prior.scale}};
  json states = json::array();
  for (const auto& s : m.states) {
    states.push_back({{"coefficients", s.coefficients}, {"mean", s.mean}, {"variance", s.variance}});
  }
  j["states"] = std::move(states);
  return j;
}

SwitchingArModel switching_ar_from_json(const json& j) {
  expect_type(j, "switching-ar");
  SwitchingArModel m;
  m.order = field<int>(j, "order");
  m.truncation = field<int>(j, "truncation");
  m.alpha = field<double>(j, "alpha");
  m.gamma = field<double>(j, "gamma");
  m.kappa = field<double>(j, "kappa");
  m.seed = field<std::uint64_t>(j, "sampler_seed");
  m.beta = field<std::vector<double>>(j, "beta");
  m.transition = field<std::vector<double>>(j, "transition");
  const json& p = j.at("prior");
  m.prior.center = field<double>(p, "center");
  m.prior.coef_variance = field<double>(p, "coef_variance");
  m.prior.intercept_variance = field<double>(p, "intercept_variance");
  m.prior.shape = field<double>(p, "shape");
  m.prior.scale = field<double>(p, "scale");
  for (const auto& s : field<json>(j, "states")) {
    ArState st;
    st.coefficients = field<std::vector<double>>(s, "coefficients");
    st.mean = field<double>(s, "mean");
    st.variance = field<double>(s, "variance");
    m.states.push_back(std::move(st));
  }
  m.validate();
  return m;
}

json to_json(const NaiveBayesModel& m) {
  json j = header("naive-bayes");
  j["attribute_states"] = m.attribute_states;
  j["adherence_probabilities"] = m.probabilities[0];
  j["violation_probabilities"] = m.probabilities[1];
  j["priors"] = {m.priors[0], m.priors[1]};
  j["smoothing"] = m.smoothing;
  return j;
}

NaiveBayesModel naive_bayes_from_json(const json& j) {
  expect_type(j, "naive-bayes");
  NaiveBayesModel m;
  m.attribute_states = field<std::vector<int>>(j, "attribute_states");
  m.probabilities[0] = field<std::vector<double>>(j, "adherence_probabilities");
  m.probabilities[1] = field<std::vector<double>>(j, "violation_probabilities");
  const auto priors = field<std::vector<double>>(j, "priors");
  if (priors.size() != 2) throw Error(ErrorCode::Format, "priors must have two entries");
  m.priors = {priors[0], priors[1]};
  m.smoothing = field<double>(j, "smoothing");
  if (m.probabilities[0].size() != m.attribute_states.size() ||
      m.probabilities[1].size() != m.attribute_states.size()) {
    throw Error(ErrorCode::Format, "attribute probabilities do not match the attribute list");
  }
  return m;
}

json to_json(const GmmParams& m) {
  json j = header("gmm");
  j["means"] = m.means;
  j["variances"] = m.variances;
  j["weights"] = m.weights;
  return j;
}

GmmParams gmm_from_json(const json& j) {
  expect_type(j, "gmm");
  GmmParams m;
  m.means = field<std::vector<double>>(j, "means");
  m.variances = field<std::vector<double>>(j, "variances");
  m.weights = field<std::vector<double>>(j, "weights");
  if (m.variances.size() != m.means.size() || m.weights.size() != m.means.size()) {
    throw Error(ErrorCode::Format, "mixture parameter lengths differ");
  }
  return m;
}

json to_json(const FoldMetrics& m) {
  return {{"tp", opt(m.tp)}, {"tn", opt(m.tn)}, {"ba", opt(m.ba)}, {"size", m.size}};
}

json to_json(const MetricsReport& r) {
  json j = header("metrics");
  j["definition"] = std::string(to_string(r.definition));
  j["strategy"] = std::string(to_string(r.strategy));
  j["folds"] = r.k;
  j["cv_seed"] = r.seed;
  j["undefined_folds"] = r.undefined_folds;
  j["mean"] = {{"tp", opt(r.tp_mean)}, {"tn", opt(r.tn_mean)}, {"ba", opt(r.ba_mean)}};
  j["std"] = {{"tp", opt(r.tp_std)}, {"tn", opt(r.tn_std)}, {"ba", opt(r.ba_std)}};
  json per = json::array();
  for (const auto& f : r.folds) per.push_back(to_json(f));
  j["per_fold"] = std::move(per);
  return j;
}

void write_json(const fs::path& path, json doc, const Provenance& p) {
  doc["config_hash"] = p.config_hash;
  doc["seed"] = p.seed;
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  check_written(out, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

}  // namespace qcseg
