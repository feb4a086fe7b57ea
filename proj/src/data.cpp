#include "oscid/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "oscid/errors.hpp"
#include "oscid/keyvalue.hpp"

namespace oscid {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCsvHeader = "frequency_Hz,amplitude_V";

double grid_step(const Spectrum& s) {
  return s.frequencies.size() > 1 ? s.frequencies[1] - s.frequencies[0] : 0.0;
}

fs::path pair_file(const fs::path& dir, std::size_t m) {
  return dir / ("pair_" + std::to_string(m) + ".csv");
}

// Uniform on [0, 1) from the top 53 bits, so the stream does not depend on
// the standard library's distribution implementation.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::VectorXd centered_grid(double center, double half_span, double step) {
  if (!(step > 0) || !(half_span >= 0))
    throw InvalidInput("grid step must be positive and half span nonnegative");
  const auto lo = static_cast<long long>(std::ceil((center - half_span) / step));
  const auto hi = static_cast<long long>(std::floor((center + half_span) / step));
  if (hi < lo) throw InvalidInput("grid is empty");
  Eigen::VectorXd f(hi - lo + 1);
  for (long long k = lo; k <= hi; ++k) f[k - lo] = static_cast<double>(k) * step;
  return f;
}

std::optional<Channel> parse_channel(const KeyValueFile& kv, const KvSection& s) {
  const KvCell* c = s.find("channel");
  if (!c || c->text == "auto") return std::nullopt;
  if (c->text == "1") return Channel::q1;
  if (c->text == "2") return Channel::q2;
  kv.fail(*c, "channel must be 1, 2 or auto, got '" + c->text + "'");
}

std::vector<ControlPair> parse_pairs(const KeyValueFile& kv, double amplitude,
                                     std::size_t n_c) {
  const KvSection& s = kv.require("pairs");
  auto rows = std::span(s.rows);
  std::string unit = "MHz";  // unless a header row says otherwise
  if (!rows.empty() && !rows.front().empty() &&
      !std::isdigit(static_cast<unsigned char>(rows.front().front().text.front()))) {
    const auto& header = rows.front();
    if (header.size() != 3 || header[0].text != "m")
      kv.fail(header.front(), "pairs header must read 'm, u1_<unit>, u2_<unit>'");
    std::string units[2];
    for (int i = 0; i < 2; ++i) {
      const std::string& name = header[i + 1].text;
      const std::string want = i == 0 ? "u1_" : "u2_";
      if (!name.starts_with(want))
        kv.fail(header[i + 1], "expected column '" + want + "<unit>'");
      units[i] = name.substr(3);
      if (!unit_scale(units[i], Dimension::frequency)) {
        std::ostringstream msg;
        msg << kv.filename() << ":" << header[i + 1].line << ":" << header[i + 1].column
            << ": unrecognized unit tag in column '" << name << "'";
        throw UnitError(msg.str());
      }
    }
    if (units[0] != units[1]) kv.fail(header[2], "u1 and u2 columns must share a unit");
    unit = units[0];
    rows = rows.subspan(1);
  }
  if (rows.size() != n_c)
    kv.fail(s, "expected " + std::to_string(n_c) + " pair rows, found " +
                   std::to_string(rows.size()));
  std::vector<ControlPair> pairs;
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const auto& row = rows[m];
    if (row.size() != 3) kv.fail(row.front(), "pair row needs 3 cells: m, u1, u2");
    if (kv.parse_number(row[0]) != static_cast<double>(m + 1))
      kv.fail(row[0], "pair rows must be numbered 1.." + std::to_string(n_c));
    const double u1 = kv.parse_quantity(row[1], unit, Dimension::frequency);
    const double u2 = kv.parse_quantity(row[2], unit, Dimension::frequency);
    ControlPair pair{u1, u2, amplitude};
    try {
      validate(pair);
    } catch (const InvalidInput& e) {
      kv.fail(row[1], e.what());
    }
    pairs.push_back(pair);
  }
  return pairs;
}

}  // namespace

bool ExperimentSet::operator==(const ExperimentSet& o) const {
  if (lab_peaks.size() != o.lab_peaks.size()) return false;
  for (std::size_t i = 0; i < lab_peaks.size(); ++i)
    if (lab_peaks[i] != o.lab_peaks[i]) return false;
  return pairs == o.pairs && eta_start == o.eta_start && eta_end == o.eta_end &&
         hybrid == o.hybrid && q_plus == o.q_plus && q_minus == o.q_minus &&
         amplitude == o.amplitude && spectra == o.spectra &&
         noise_floor == o.noise_floor && frf == o.frf && channel == o.channel &&
         peak_half_window_bins == o.peak_half_window_bins;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::pair<Spectrum, double> subtract_noise(const Spectrum& spectrum) {
  if (spectrum.amplitudes.size() == 0) throw EmptyWindow("spectrum is empty");
  const double xi = spectrum.amplitudes.mean();
  Spectrum out{spectrum.frequencies,
               (spectrum.amplitudes.array() - xi).cwiseMax(0.0).matrix()};
  return {std::move(out), xi};
}

double extract_peak(const Spectrum& spectrum, double u, double half_window) {
  const double slack = 1e-12 * std::max(1.0, std::abs(u));
  double best = -1.0;
  for (Eigen::Index i = 0; i < spectrum.frequencies.size(); ++i)
    if (std::abs(spectrum.frequencies[i] - u) <= half_window + slack)
      best = std::max(best, spectrum.amplitudes[i]);
  if (best < 0) throw EmptyWindow("no spectrum bin within the peak window");
  return best;
}

std::vector<HybridStiffness<double>> drift_interpolate(
    const HybridStiffness<double>& start, const HybridStiffness<double>& end,
    std::size_t n_c) {
  if (n_c == 0) throw InvalidInput("drift interpolation needs n_c >= 1");
  std::vector<HybridStiffness<double>> out;
  out.reserve(n_c);
  for (std::size_t m = 0; m < n_c; ++m) {
    const double t = n_c == 1 ? 0.0 : static_cast<double>(m) / static_cast<double>(n_c - 1);
    out.push_back({(1.0 - t) * start.eta_plus + t * end.eta_plus,
                   (1.0 - t) * start.eta_minus + t * end.eta_minus});
  }
  return out;
}

void finalize(ExperimentSet& set) {
  if (set.pairs.empty()) throw InvalidInput("experiment has no control pairs");
  if (set.spectra.size() != set.n_c())
    throw InvalidInput("experiment needs one spectrum per control pair");
  if (!(set.noise_floor >= 0)) throw InvalidInput("noise floor must be nonnegative");
  set.hybrid = drift_interpolate(set.eta_start, set.eta_end, set.n_c());
  set.lab_peaks.clear();
  for (std::size_t m = 0; m < set.n_c(); ++m) {
    const auto [clean, xi] = subtract_noise(set.spectra[m]);
    const double half = set.peak_half_window_bins * grid_step(clean);
    set.lab_peaks.emplace_back(extract_peak(clean, set.pairs[m].u1, half),
                               extract_peak(clean, set.pairs[m].u2, half));
  }
}

ExperimentSet generate_synthetic(const SyntheticTruth& truth,
                                 std::span<const ControlPair> pairs,
                                 const GridSpec& grid, std::uint64_t seed,
                                 std::optional<Channel> channel) {
  if (pairs.empty()) throw InvalidInput("generator needs at least one control pair");
  for (const auto& pair : pairs) {
    validate(pair);
    if (pair.amplitude != pairs.front().amplitude)
      throw InvalidInput("all control pairs must share one drive amplitude");
  }
  if (!(truth.d1 > 0) || !(truth.d2 > 0) || !(truth.chi > 0) || !(truth.noise_floor >= 0))
    throw InvalidInput("truth needs positive damping and scaling, nonnegative noise");

  ExperimentSet set;
  set.pairs.assign(pairs.begin(), pairs.end());
  set.eta_start = truth.eta_start;
  set.eta_end = truth.eta_end;
  set.amplitude = pairs.front().amplitude;
  set.noise_floor = truth.noise_floor;
  set.peak_half_window_bins = grid.peak_half_window_bins;
  set.channel = channel.value_or(nearest_channel(pairs, truth.eta_start));

  const ParamVector p = truth.params();
  const Matrix2<double> dt =
      hybrid_damping(rotation_from_theta(p.theta(), p.branch), p.d1(), p.d2());
  set.q_plus = truth.eta_start.eta_plus / (dt(0, 0) / two_pi<double>);
  set.q_minus = truth.eta_start.eta_minus / (dt(1, 1) / two_pi<double>);

  const auto hybrid = drift_interpolate(truth.eta_start, truth.eta_end, pairs.size());
  const double xi = truth.noise_floor;
  std::mt19937_64 rng(seed);

  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const ControlPair& pair = pairs[m];
    const double center = 0.5 * (pair.u1 + pair.u2);
    Spectrum s;
    s.frequencies = centered_grid(center, grid.spectrum_half_span, grid.spectrum_step);
    const Eigen::Index n = s.frequencies.size();
    s.amplitudes.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) s.amplitudes[i] = 2.0 * xi * unit_uniform(rng);

    const Eigen::Vector2d heights =
        truth.chi * steady_peak_amplitudes(p, hybrid[m], pair, set.channel);
    const double first = s.frequencies[0];
    Eigen::Index bins[2];
    for (int k = 0; k < 2; ++k) {
      const double u = k == 0 ? pair.u1 : pair.u2;
      bins[k] = static_cast<Eigen::Index>(std::llround((u - first) / grid.spectrum_step));
      if (bins[k] < 0 || bins[k] >= n)
        throw InvalidInput("drive frequency outside the spectrum grid");
    }
    if (bins[0] == bins[1]) throw InvalidInput("drive tones share a spectrum bin");

    // Peak bin k holds z_k + (t_k - xi) + M where M is the resulting mean of
    // the whole spectrum, so mean subtraction hands back z_k within +-xi and
    // exactly when xi = 0.
    const double floor_sum = s.amplitudes.sum();
    const double mean = (floor_sum + heights.sum() - 2.0 * xi) / static_cast<double>(n - 2);
    for (int k = 0; k < 2; ++k)
      s.amplitudes[bins[k]] = heights[k] + (s.amplitudes[bins[k]] - xi) + mean;
    set.spectra.push_back(std::move(s));
  }

  const double eta = set.channel == Channel::q1 ? truth.eta_start.eta_plus
                                                : truth.eta_start.eta_minus;
  set.frf.frequencies = centered_grid(eta, grid.frf_half_span, grid.frf_step);
  set.frf.amplitudes = truth.chi * simulate_frf(p, truth.eta_start, set.frf.frequencies,
                                                set.channel);
  for (Eigen::Index i = 0; i < set.frf.amplitudes.size(); ++i)
    set.frf.amplitudes[i] += 2.0 * xi * unit_uniform(rng);
  set.frf.noise_floor = xi;

  finalize(set);
  return set;
}

Spectrum read_spectrum_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), 0, 0, "cannot open file");
  const std::string name = path.string();
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(name, 1, 1, "file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw SchemaError(name, 1, 1, std::string("header must be '") + kCsvHeader + "'");

  std::vector<double> f, a;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw SchemaError(name, line_no, 1, "expected two comma-separated cells");
    double v[2];
    const std::size_t starts[2] = {0, comma + 1};
    const std::size_t ends[2] = {comma, line.size()};
    for (int k = 0; k < 2; ++k) {
      auto [ptr, ec] = std::from_chars(line.data() + starts[k], line.data() + ends[k], v[k]);
      if (ec != std::errc() || ptr != line.data() + ends[k] || !std::isfinite(v[k]))
        throw SchemaError(name, line_no, starts[k] + 1, "expected a finite number");
    }
    if (!f.empty() && !(v[0] > f.back()))
      throw SchemaError(name, line_no, 1, "frequencies must be strictly increasing");
    if (v[1] < 0)
      throw SchemaError(name, line_no, comma + 2, "amplitudes must be nonnegative");
    f.push_back(v[0]);
    a.push_back(v[1]);
  }
  if (f.empty()) throw SchemaError(name, line_no, 1, "no data rows");
  return {Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size())),
          Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()))};
}

void write_spectrum_csv(const fs::path& path, const Eigen::VectorXd& frequencies,
                        const Eigen::VectorXd& amplitudes) {
  if (frequencies.size() != amplitudes.size())
    throw InvalidInput("frequency and amplitude columns differ in length");
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (Eigen::Index i = 0; i < frequencies.size(); ++i)
    out << format_double(frequencies[i]) << ',' << format_double(amplitudes[i]) << '\n';
}

ExperimentDesign read_design(const KeyValueFile& kv) {
  const KvSection& exp = kv.require("experiment");
  const KvSection& drift = kv.require("drift");

  ExperimentDesign d;
  const double n_c = kv.number(exp, "n_c");
  if (!(n_c >= 1) || n_c != std::floor(n_c))
    kv.fail(*exp.find("n_c"), "n_c must be a positive integer");
  d.amplitude = kv.number(exp, "amplitude_A");
  if (!(d.amplitude > 0)) kv.fail(*exp.find("amplitude_A"), "amplitude_A must be positive");
  d.noise_floor = kv.quantity(exp, "noise_floor", Dimension::voltage);
  if (!(d.noise_floor >= 0)) kv.fail(exp, "noise floor must be nonnegative");
  if (auto bins = kv.find_number(exp, "peak_half_window_bins")) {
    if (!(*bins >= 0) || *bins != std::floor(*bins))
      kv.fail(*exp.find("peak_half_window_bins"), "expected a nonnegative integer");
    d.peak_half_window_bins = static_cast<int>(*bins);
  }
  d.channel = parse_channel(kv, exp);

  d.eta_start = {kv.quantity(drift, "eta_plus_start", Dimension::frequency),
                 kv.quantity(drift, "eta_minus_start", Dimension::frequency)};
  d.eta_end = {kv.quantity(drift, "eta_plus_end", Dimension::frequency),
               kv.quantity(drift, "eta_minus_end", Dimension::frequency)};
  for (const auto& eta : {d.eta_start, d.eta_end})
    if (!(eta.eta_plus > 0) || !(eta.eta_plus <= eta.eta_minus))
      kv.fail(drift, "eigenfrequencies must satisfy 0 < eta_plus <= eta_minus");
  d.q_plus = kv.find_number(drift, "Q_plus");
  d.q_minus = kv.find_number(drift, "Q_minus");
  if ((d.q_plus && !(*d.q_plus > 0)) || (d.q_minus && !(*d.q_minus > 0)))
    kv.fail(drift, "quality factors must be positive");

  d.pairs = parse_pairs(kv, d.amplitude, static_cast<std::size_t>(n_c));
  return d;
}

ExperimentSet load_experiment(const fs::path& config_path, const fs::path& data_dir) {
  const KeyValueFile kv = KeyValueFile::read(config_path);
  const ExperimentDesign d = read_design(kv);
  if (!d.q_plus || !d.q_minus) kv.fail(kv.require("drift"), "Q_plus and Q_minus are required");

  ExperimentSet set;
  set.pairs = d.pairs;
  set.amplitude = d.amplitude;
  set.noise_floor = d.noise_floor;
  set.peak_half_window_bins = d.peak_half_window_bins;
  set.eta_start = d.eta_start;
  set.eta_end = d.eta_end;
  set.q_plus = *d.q_plus;
  set.q_minus = *d.q_minus;
  set.channel = d.channel.value_or(nearest_channel(set.pairs, set.eta_start));

  for (std::size_t m = 1; m <= set.n_c(); ++m) {
    const fs::path file = pair_file(data_dir, m);
    if (!fs::exists(file))
      throw SchemaError(file.string(), 0, 0,
                        "missing spectrum file for pair " + std::to_string(m));
    set.spectra.push_back(read_spectrum_csv(file));
  }
  const fs::path frf_file = data_dir / "frf.csv";
  if (!fs::exists(frf_file))
    throw SchemaError(frf_file.string(), 0, 0, "missing FRF sweep file");
  Spectrum frf = read_spectrum_csv(frf_file);
  set.frf = {std::move(frf.frequencies), std::move(frf.amplitudes), set.noise_floor};

  try {
    finalize(set);
  } catch (const EmptyWindow& e) {
    throw SchemaError(config_path.string(), 0, 0,
                      std::string("drive frequency not covered by its spectrum: ") + e.what());
  }
  return set;
}

fs::path save_experiment(const ExperimentSet& set, const fs::path& dir,
                         const std::string& extra_sections) {
  fs::create_directories(dir);
  const fs::path cfg = dir / "experiment.cfg";
  std::ofstream out(cfg);
  if (!out) throw InvalidInput("cannot write " + cfg.string());
  out << "[experiment]\n"
      << "n_c = " << set.n_c() << '\n'
      << "amplitude_A = " << format_double(set.amplitude) << '\n'
      << "channel = " << to_int(set.channel) << '\n'
      << "noise_floor_V = " << format_double(set.noise_floor) << '\n'
      << "peak_half_window_bins = " << set.peak_half_window_bins << "\n\n"
      << "[drift]\n"
      << "eta_plus_start_Hz = " << format_double(set.eta_start.eta_plus) << '\n'
      << "eta_plus_end_Hz = " << format_double(set.eta_end.eta_plus) << '\n'
      << "eta_minus_start_Hz = " << format_double(set.eta_start.eta_minus) << '\n'
      << "eta_minus_end_Hz = " << format_double(set.eta_end.eta_minus) << '\n'
      << "Q_plus = " << format_double(set.q_plus) << '\n'
      << "Q_minus = " << format_double(set.q_minus) << "\n\n"
      << "[pairs]\n"
      << "m, u1_Hz, u2_Hz\n";
  for (std::size_t m = 0; m < set.n_c(); ++m)
    out << m + 1 << ", " << format_double(set.pairs[m].u1) << ", "
        << format_double(set.pairs[m].u2) << '\n';
  if (!extra_sections.empty()) out << '\n' << extra_sections;
  out.close();

  for (std::size_t m = 0; m < set.n_c(); ++m)
    write_spectrum_csv(pair_file(dir, m + 1), set.spectra[m].frequencies,
                       set.spectra[m].amplitudes);
  write_spectrum_csv(dir / "frf.csv", set.frf.frequencies, set.frf.amplitudes);
  return cfg;
}

}  // namespace oscid
