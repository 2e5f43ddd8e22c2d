#include "mlbench/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mlbench {

namespace {

template <class... Fs> struct Overload : Fs... { using Fs::operator()...; };
template <class... Fs> Overload(Fs...) -> Overload<Fs...>;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_header_line(const std::string& line, std::map<std::string, std::string>& header) {
  if (line.rfind("#", 0) != 0) return false;
  const auto colon = line.find(':');
  if (colon != std::string::npos) {
    header[trim(line.substr(1, colon - 1))] = trim(line.substr(colon + 1));
  }
  return true;
}

double parse_double(const std::string& tok) {
  const std::string t = trim(tok);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw std::runtime_error("malformed number '" + t + "'");
  }
  return v;
}

std::vector<double> split_numbers(const std::string& line, char sep) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string tok;
  if (sep == ' ') {
    while (ss >> tok) out.push_back(parse_double(tok));
  } else {
    while (std::getline(ss, tok, sep)) out.push_back(parse_double(tok));
  }
  return out;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) {
      throw std::runtime_error("ragged matrix in file");
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][j];
  }
  return m;
}

void write_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << "[" << name << "]\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(i, j));
    out << "\n";
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_out(path);
  out << data.N() << "," << data.D() << "\n";
  for (Eigen::Index i = 0; i < data.Y.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.Y.cols(); ++j) {
      out << (j ? "," : "") << format_double(data.Y(i, j));
    }
    out << "\n";
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file");
  const auto shape = split_numbers(line, ',');
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) {
    throw std::runtime_error("dataset must start with a 'N,D' line");
  }
  const auto n = static_cast<std::size_t>(shape[0]);
  const auto d = static_cast<Eigen::Index>(shape[1]);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_numbers(line, ','));
  }
  if (rows.size() != n) throw std::runtime_error("row count mismatch in dataset");
  return Dataset{Eigen::MatrixXd(to_matrix(rows, d))};
}

void write_state(const std::filesystem::path& path, const ModelSpec& spec,
                 const ExactSample& sample) {
  check_state(spec, sample.state);
  auto out = open_out(path);
  out << "# model: " << model_name(kind(spec)) << "\n"
      << "# seed: " << sample.seed << "\n"
      << "# spec_hash: " << sample.spec_hash << "\n"
      << "# exact: " << (sample.exact ? "true" : "false") << "\n";
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        const auto& x = state_as(s, sample.state);
        out << "[assignments]\n";
        for (std::size_t i = 0; i < x.z.size(); ++i) out << (i ? " " : "") << x.z[i];
        out << "\n";
        write_matrix(out, "theta", x.theta);
      },
      [&](const LowRankSpec& s) {
        const auto& x = state_as(s, sample.state);
        write_matrix(out, "U", x.U);
        write_matrix(out, "V", x.V);
      },
      [&](const BinarySpec& s) {
        const auto& x = state_as(s, sample.state);
        write_matrix(out, "Z", x.Z);
        write_matrix(out, "A", x.A);
      }}, spec);
}

ExactSample read_state(const std::filesystem::path& path, const ModelSpec& spec) {
  auto in = open_in(path);
  std::map<std::string, std::string> h;
  std::map<std::string, std::vector<std::vector<double>>> sections;
  std::string line, current;
  while (std::getline(in, line)) {
    if (parse_header_line(line, h)) continue;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']') {
      current = t.substr(1, t.size() - 2);
      sections[current];
      continue;
    }
    if (current.empty()) throw std::runtime_error("state payload outside a section");
    sections[current].push_back(split_numbers(t, ' '));
  }
  for (const char* key : {"model", "seed", "spec_hash", "exact"}) {
    if (!h.count(key)) throw std::runtime_error("provenance missing");
  }
  if (h["model"] != model_name(kind(spec))) throw std::runtime_error("spec mismatch: model");
  ExactSample out;
  out.seed = std::stoull(h["seed"]);
  out.spec_hash = std::stoull(h["spec_hash"]);
  out.exact = h["exact"] == "true";
  if (out.spec_hash != spec_hash(spec)) throw std::runtime_error("spec mismatch: spec_hash");
  auto section = [&](const std::string& name) -> const std::vector<std::vector<double>>& {
    if (!sections.count(name)) throw std::runtime_error("state section [" + name + "] missing");
    return sections[name];
  };
  std::visit(Overload{
      [&](const ClusteringSpec& s) {
        ClusteringState x;
        const auto& z = section("assignments");
        if (s.N > 0) {
          if (z.size() != 1) throw std::runtime_error("state section [assignments] malformed");
          for (double v : z[0]) x.z.push_back(static_cast<int>(v));
        }
        x.theta = to_matrix(section("theta"), s.D);
        out.state = x;
      },
      [&](const LowRankSpec& s) {
        out.state = LowRankState{to_matrix(section("U"), s.K), to_matrix(section("V"), s.D)};
      },
      [&](const BinarySpec& s) {
        out.state = BinaryState{to_matrix(section("Z"), s.K), to_matrix(section("A"), s.D)};
      }}, spec);
  check_state(spec, out.state);
  return out;
}

}  // namespace mlbench
