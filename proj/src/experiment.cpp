#include "mlbench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    const auto b = tok.find_first_not_of(" \t\r");
    const auto e = tok.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split(s, ',')) {
    if (!t.empty()) out.push_back(std::stod(t));
  }
  return out;
}

std::vector<long> parse_budgets(const std::string& s) {
  std::vector<long> out;
  for (const auto& t : split(s, ',')) {
    if (t.empty()) continue;
    std::size_t used = 0;
    const long v = std::stol(t, &used);
    if (used != t.size()) throw std::invalid_argument("malformed budget '" + t + "'");
    out.push_back(v);
  }
  return out;
}

std::string direction_label(Direction d) { return direction_name(d); }

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  return buf;
}

}  // namespace

ExperimentConfig default_experiment(ModelKind kind) {
  ExperimentConfig c;
  c.spec = default_spec(kind);
  using K = EstimatorKind;
  c.estimators = {
      {K::AIS, {10, 100, 1000, 10000}},
      {K::ReverseAIS, {10, 100, 1000, 10000}},
      {K::SMC, {1, 2, 5, 20}},
      {K::SHME, {1, 2, 5, 20}},
      {K::LW, {10, 100, 1000, 10000}},
      {K::HME, {10, 100, 1000, 10000}},
      {K::BIC, {500}},
      {K::CMS, {10, 100, 1000}},
      {K::NS, {1, 5, 20, 100}},
      {K::VB, {1, 10}},
  };
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::runtime_error("config: " + std::string(e.what()));
  }
  const std::string model = tree.get<std::string>("experiment.model", "clustering");
  ExperimentConfig c = default_experiment(parse_model_kind(model));
  c.seed = tree.get<std::uint64_t>("experiment.seed", c.seed);
  c.n_trials = tree.get<int>("experiment.trials", c.n_trials);
  c.workers = tree.get<int>("experiment.workers", c.workers);
  c.record_timing = tree.get<bool>("experiment.timing", c.record_timing);
  c.out_dir = tree.get<std::string>("experiment.out", c.out_dir.string());
  c.ground_truth_T = tree.get<long>("ground_truth.T", c.ground_truth_T);
  c.ground_truth_chains = tree.get<int>("ground_truth.chains", c.ground_truth_chains);

  std::visit(Overload{
      [&](ClusteringSpec& s) {
        s.N = tree.get<int>("model.N", s.N);
        s.D = tree.get<int>("model.D", s.D);
        s.K = tree.get<int>("model.K", s.K);
        s.between_var = tree.get<double>("model.between_var", s.between_var);
        s.noise_var = tree.get<double>("model.noise_var", s.noise_var);
        if (auto v = tree.get_optional<std::string>("model.mix_probs")) {
          s.mix_probs = parse_list(*v);
        } else {
          s.mix_probs.clear();
        }
      },
      [&](LowRankSpec& s) {
        s.N = tree.get<int>("model.N", s.N);
        s.D = tree.get<int>("model.D", s.D);
        s.K = tree.get<int>("model.K", s.K);
        s.u_var = tree.get<double>("model.u_var", s.u_var);
        s.v_var = tree.get<double>("model.v_var", s.v_var);
        s.noise_var = tree.get<double>("model.noise_var", s.noise_var);
      },
      [&](BinarySpec& s) {
        s.N = tree.get<int>("model.N", s.N);
        s.D = tree.get<int>("model.D", s.D);
        s.K = tree.get<int>("model.K", s.K);
        s.a_var = tree.get<double>("model.a_var", s.a_var);
        s.noise_var = tree.get<double>("model.noise_var", s.noise_var);
        if (auto v = tree.get_optional<std::string>("model.attr_probs")) {
          s.attr_probs = parse_list(*v);
        } else {
          s.attr_probs.clear();
        }
      }}, c.spec);
  c.spec = validated(c.spec);

  if (auto section = tree.get_child_optional("estimators")) {
    c.estimators.clear();
    for (const auto& [name, value] : *section) {
      c.estimators.push_back({estimator_info(name).kind, parse_budgets(value.data())});
    }
  }
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  if (c.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (c.ground_truth_T < 2) throw std::invalid_argument("ground-truth T must be >= 2");
  if (c.ground_truth_chains < 1) throw std::invalid_argument("ground-truth chains must be >= 1");
  for (const auto& e : c.estimators) {
    if (e.budgets.empty()) {
      throw std::invalid_argument("estimator " + estimator_info(e.kind).name + " has no budgets");
    }
    for (long b : e.budgets) {
      if (b < 1) throw std::invalid_argument("budgets must be positive");
    }
  }
}

std::uint64_t trial_seed(std::uint64_t master, const std::string& estimator, long budget,
                         int trial) {
  std::uint64_t h = splitmix(master);
  h = splitmix(h ^ fnv1a(estimator));
  h = splitmix(h ^ static_cast<std::uint64_t>(budget));
  return splitmix(h ^ static_cast<std::uint64_t>(trial));
}

std::filesystem::path dataset_path(const std::filesystem::path& dir) { return dir / "dataset.csv"; }
std::filesystem::path state_path(const std::filesystem::path& dir) { return dir / "state.txt"; }
std::filesystem::path ground_truth_path(const std::filesystem::path& dir) {
  return dir / "ground_truth.txt";
}
std::filesystem::path results_path(const std::filesystem::path& dir) { return dir / "results.csv"; }

Benchmark simulate_benchmark(const ExperimentConfig& c) {
  const ModelSpec spec = validated(c.spec);
  RngStream rng(c.seed, kSimulateStream);
  const auto sim = simulate(spec, rng);
  Benchmark b{sim.data, exact_sample_of(spec, sim, c.seed)};
  write_dataset(dataset_path(c.out_dir), b.data);
  write_state(state_path(c.out_dir), spec, b.exact);
  return b;
}

Benchmark load_benchmark(const ExperimentConfig& c) {
  const ModelSpec spec = validated(c.spec);
  Benchmark b{read_dataset(dataset_path(c.out_dir)), {}};
  check_data(spec, b.data);
  b.exact = read_state(state_path(c.out_dir), spec);
  return b;
}

GroundTruth ground_truth_from(const SandwichResult& s, long T, int chains) {
  GroundTruth gt;
  gt.lower = s.lower.value;
  gt.upper = s.upper.value;
  gt.gap = s.gap;
  gt.T = T;
  gt.chains = chains;
  gt.converged = s.gap <= kGroundTruthGap;
  if (gt.converged) gt.truth = 0.5 * (gt.lower + gt.upper);
  return gt;
}

GroundTruth run_ground_truth(const ExperimentConfig& c, const Benchmark& b) {
  require_exact(b.exact);
  const auto s = bdmc_sandwich(c.spec, b.data, b.exact,
                               make_sigmoid_schedule(static_cast<int>(c.ground_truth_T)),
                               c.ground_truth_chains, RngStream(c.seed, kGroundTruthStream));
  return ground_truth_from(s, c.ground_truth_T, c.ground_truth_chains);
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "status: " << (gt.converged ? "converged" : "not converged, increase T") << "\n";
  out << "lower: " << format_double(gt.lower) << "\n";
  out << "upper: " << format_double(gt.upper) << "\n";
  out << "gap: " << format_double(gt.gap) << "\n";
  out << "T: " << gt.T << "\nchains: " << gt.chains << "\n";
  if (gt.truth) out << "truth: " << format_double(*gt.truth) << "\n";
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    auto value = line.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    kv[line.substr(0, colon)] = value;
  }
  for (const char* key : {"status", "lower", "upper", "gap", "T", "chains"}) {
    if (!kv.count(key)) throw std::runtime_error("ground truth file lacks '" + std::string(key) + "'");
  }
  GroundTruth gt;
  gt.lower = std::stod(kv["lower"]);
  gt.upper = std::stod(kv["upper"]);
  gt.gap = std::stod(kv["gap"]);
  gt.T = std::stol(kv["T"]);
  gt.chains = std::stoi(kv["chains"]);
  gt.converged = kv["status"] == "converged";
  if (kv.count("truth")) gt.truth = std::stod(kv["truth"]);
  return gt;
}

ResultRow run_trial(const ExperimentConfig& c, const Benchmark& b, EstimatorKind kind, long budget,
                    int trial) {
  const auto& info = estimator_info(kind);
  ResultRow row;
  row.model = model_name(mlbench::kind(c.spec));
  row.estimator = info.name;
  row.budget_name = info.budget_name;
  row.budget_value = budget;
  row.trial = trial;
  row.seed = trial_seed(c.seed, info.name, budget, trial);
  row.direction = direction_label(info.direction);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    row.log_ml = run_estimator(kind, budget, c.spec, b.data, &b.exact,
                               RngStream(row.seed, kTrialStream))
                     .value;
  } catch (const std::exception& e) {
    row.log_ml = std::numeric_limits<double>::quiet_NaN();
    row.error = e.what();
  }
  if (c.record_timing) {
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return row;
}

ResultRow combine_rows(const std::vector<ResultRow>& trials) {
  if (trials.empty()) throw std::invalid_argument("empty aggregation");
  ResultRow row = trials.front();
  row.trial = -1;
  row.combined = true;
  row.error.clear();
  row.wall_seconds = 0.0;
  std::vector<double> values;
  for (const auto& t : trials) {
    row.wall_seconds += t.wall_seconds;
    if (t.error.empty() && !std::isnan(t.log_ml)) values.push_back(t.log_ml);
  }
  row.seed = 0;
  if (values.empty()) {
    row.log_ml = std::numeric_limits<double>::quiet_NaN();
    row.error = "every trial failed";
  } else {
    row.log_ml = combine_trials(estimator_info(row.estimator).combine, values);
  }
  return row;
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.model, a.estimator, a.budget_value, a.combined, a.trial) <
           std::tie(b.model, b.estimator, b.budget_value, b.combined, b.trial);
  });
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& c, const Benchmark& b, std::ostream* log) {
  validate(c);
  struct Cell {
    EstimatorKind kind;
    long budget;
    int trial;
  };
  std::vector<Cell> cells;
  for (const auto& e : c.estimators)
    for (long budget : e.budgets)
      for (int t = 0; t < c.n_trials; ++t) cells.push_back({e.kind, budget, t});

  std::vector<ResultRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      rows[i] = run_trial(c, b, cells[i].kind, cells[i].budget, cells[i].trial);
      if (log && !rows[i].error.empty()) {
        std::lock_guard lock(log_mutex);
        *log << "error: " << rows[i].estimator << " " << rows[i].budget_name << "="
             << rows[i].budget_value << " trial " << rows[i].trial << ": " << rows[i].error
             << "\n";
      }
    }
  };
  const int n_workers = std::min<int>(c.workers, std::max<std::size_t>(cells.size(), 1));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<std::pair<std::string, long>, std::vector<ResultRow>> groups;
  for (const auto& r : rows) groups[{r.estimator, r.budget_value}].push_back(r);
  for (const auto& [key, trials] : groups) rows.push_back(combine_rows(trials));
  sort_rows(rows);
  return rows;
}

void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kResultHeader << "\n";
  for (const auto& r : rows) {
    out << r.model << "," << r.estimator << "," << r.budget_name << "," << r.budget_value << ","
        << r.trial << "," << r.seed << "," << format_double(r.log_ml) << "," << r.direction << ","
        << format_seconds(r.wall_seconds) << "," << (r.combined ? 1 : 0) << "\n";
  }
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultHeader) {
    throw std::runtime_error("results file has an unexpected header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw std::runtime_error("malformed results row: " + line);
    ResultRow r;
    r.model = f[0];
    r.estimator = f[1];
    r.budget_name = f[2];
    r.budget_value = std::stol(f[3]);
    r.trial = std::stoi(f[4]);
    r.seed = std::stoull(f[5]);
    r.log_ml = std::strtod(f[6].c_str(), nullptr);
    r.direction = f[7];
    r.wall_seconds = std::stod(f[8]);
    r.combined = f[9] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string kass_raftery_label(double nats) {
  const double log10_ratio = std::abs(nats) / std::numbers::ln10;
  if (log10_ratio <= 0.5) return "not worth more than a bare mention";
  if (log10_ratio <= 1.0) return "substantial";
  if (log10_ratio <= 2.0) return "strong";
  return "decisive";
}

Report build_report(const std::vector<ResultRow>& rows, std::optional<double> truth) {
  Report report;
  report.truth = truth;
  std::map<std::pair<std::string, long>, std::vector<const ResultRow*>> trials;
  std::map<std::pair<std::string, long>, const ResultRow*> combined;
  for (const auto& r : rows) {
    if (r.combined) {
      combined[{r.estimator, r.budget_value}] = &r;
    } else {
      trials[{r.estimator, r.budget_value}].push_back(&r);
    }
  }
  for (const auto& [key, group] : trials) {
    ReportRow rr;
    rr.estimator = key.first;
    rr.budget_name = group.front()->budget_name;
    rr.budget_value = key.second;
    std::vector<double> values;
    double seconds = 0.0;
    for (const auto* r : group) {
      seconds += r->wall_seconds;
      if (!std::isnan(r->log_ml)) values.push_back(r->log_ml);
    }
    rr.n_trials = static_cast<int>(values.size());
    rr.mean_seconds = seconds / static_cast<double>(group.size());
    if (values.empty()) {
      rr.mean = rr.combined = std::numeric_limits<double>::quiet_NaN();
    } else {
      double s = 0.0;
      for (double v : values) s += v;
      rr.mean = s / static_cast<double>(values.size());
      rr.combined = combined.count(key)
                        ? combined[key]->log_ml
                        : combine_trials(estimator_info(rr.estimator).combine, values);
      if (truth) {
        double sq = 0.0;
        for (double v : values) sq += (v - *truth) * (v - *truth);
        rr.rmse = std::sqrt(sq / static_cast<double>(values.size()));
        rr.evidence = kass_raftery_label(rr.combined - *truth);
        if (*rr.rmse < kRmseThreshold &&
            std::find(report.accurate.begin(), report.accurate.end(), rr.estimator) ==
                report.accurate.end()) {
          report.accurate.push_back(rr.estimator);
        }
      }
    }
    report.rows.push_back(std::move(rr));
  }
  return report;
}

void write_report(const std::filesystem::path& dir, const Report& report) {
  std::filesystem::create_directories(dir / "plots");
  std::ofstream csv(dir / "summary.csv", std::ios::binary);
  std::ofstream txt(dir / "summary.txt", std::ios::binary);
  if (!csv || !txt) throw std::runtime_error("cannot write report in " + dir.string());
  const bool with_truth = report.truth.has_value();
  csv << "estimator,budget_name,budget_value,n_trials,mean_log_ml,combined_log_ml,mean_seconds";
  if (with_truth) csv << ",rmse,rmse_below_10,evidence";
  csv << "\n";

  char buf[256];
  if (with_truth) {
    txt << "ground truth log-ML: " << format_double(*report.truth) << "\n\n";
  } else {
    txt << "warning: no ground truth; RMSE columns omitted\n\n";
  }
  std::snprintf(buf, sizeof(buf), "%-12s %-17s %10s %6s %14s %14s %10s", "estimator", "budget",
                "value", "trials", "mean", "combined", "seconds");
  txt << buf;
  if (with_truth) txt << "       rmse  <10  evidence";
  txt << "\n";

  std::map<std::string, std::vector<const ReportRow*>> curves;
  for (const auto& r : report.rows) {
    curves[r.estimator].push_back(&r);
    csv << r.estimator << "," << r.budget_name << "," << r.budget_value << "," << r.n_trials << ","
        << format_double(r.mean) << "," << format_double(r.combined) << ","
        << format_seconds(r.mean_seconds);
    std::snprintf(buf, sizeof(buf), "%-12s %-17s %10ld %6d %14.4f %14.4f %10.4f",
                  r.estimator.c_str(), r.budget_name.c_str(), r.budget_value, r.n_trials, r.mean,
                  r.combined, r.mean_seconds);
    txt << buf;
    if (with_truth) {
      const bool ok = r.rmse && *r.rmse < kRmseThreshold;
      csv << "," << (r.rmse ? format_double(*r.rmse) : "nan") << "," << (ok ? 1 : 0) << ","
          << r.evidence.value_or("");
      std::snprintf(buf, sizeof(buf), " %10.4f  %-3s  %s", r.rmse.value_or(NAN), ok ? "yes" : "no",
                    r.evidence.value_or("").c_str());
      txt << buf;
    }
    csv << "\n";
    txt << "\n";
  }
  if (with_truth) {
    txt << "\nestimators with RMSE < " << kRmseThreshold << " nats:";
    for (const auto& e : report.accurate) txt << " " << e;
    if (report.accurate.empty()) txt << " none";
    txt << "\n";
  }

  for (const auto& [name, rows] : curves) {
    std::ofstream mean(dir / "plots" / (name + "_mean.dat"), std::ios::binary);
    mean << "# " << rows.front()->budget_name << " mean_log_ml combined_log_ml mean_seconds\n";
    for (const auto* r : rows) {
      mean << r->budget_value << " " << format_double(r->mean) << " "
           << format_double(r->combined) << " " << format_seconds(r->mean_seconds) << "\n";
    }
    if (!with_truth) continue;
    std::ofstream rmse(dir / "plots" / (name + "_rmse.dat"), std::ios::binary);
    rmse << "# " << rows.front()->budget_name << " rmse mean_seconds\n";
    for (const auto* r : rows) {
      rmse << r->budget_value << " " << format_double(r->rmse.value_or(NAN)) << " "
           << format_seconds(r->mean_seconds) << "\n";
    }
  }
}

}  // namespace mlbench
