#include "reprdyn/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace reprdyn {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw CsvError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw CsvError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  traj.validate();
  out << (traj.has_loss() ? "t,dh2,dy2,w,loss\n" : "t,dh2,dy2,w\n");
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const TheoryState& s = traj.states[i];
    out << format_double(traj.times[i]) << ',' << format_double(s.dh2) << ','
        << format_double(s.dy2) << ',' << format_double(s.w);
    if (traj.has_loss()) out << ',' << format_double(traj.loss[i]);
    out << '\n';
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  auto out = open_out(path);
  write_trajectory_csv(out, traj);
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CsvError("trajectory csv: missing header");
  line = strip_cr(line);
  bool with_loss = false;
  bool record = false;
  if (line == "t,dh2,dy2,w,loss") {
    with_loss = true;
  } else if (line == "epoch,loss,dh2,dy2,w") {
    with_loss = true;
    record = true;
  } else if (line != "t,dh2,dy2,w") {
    throw CsvError("trajectory csv: unexpected header '" + line + "'");
  }
  Trajectory traj;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != (with_loss ? 5u : 4u)) {
      throw CsvError("line " + std::to_string(line_no) + ": wrong field count");
    }
    if (record) {
      if (f[2].empty()) throw CsvError("line " + std::to_string(line_no) + ": record has no probe values");
      traj.push_back(parse_double(f[0], line_no),
                     {parse_double(f[2], line_no), parse_double(f[3], line_no),
                      parse_double(f[4], line_no)});
      traj.loss.push_back(parse_double(f[1], line_no));
      continue;
    }
    traj.push_back(parse_double(f[0], line_no),
                   {parse_double(f[1], line_no), parse_double(f[2], line_no),
                    parse_double(f[3], line_no)});
    if (with_loss) traj.loss.push_back(parse_double(f[4], line_no));
  }
  traj.validate();
  return traj;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  return read_trajectory_csv(in);
}

void write_record_csv(const std::filesystem::path& path, const TrainingRecord& record) {
  auto out = open_out(path);
  out << "epoch,loss,dh2,dy2,w\n";
  for (std::size_t i = 0; i < record.epochs.size(); ++i) {
    out << record.epochs[i] << ',' << format_double(record.loss[i]);
    if (i < record.probes.size()) {
      const PairObservation& o = record.probes[i];
      out << ',' << format_double(o.dh2) << ',' << format_double(o.dy2) << ','
          << format_double(o.w);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

void write_distance_csv(const std::filesystem::path& path, const DistanceMatrix& d) {
  auto out = open_out(path);
  const Eigen::Index n = d.size();
  auto label = [&](Eigen::Index i) {
    return d.labels.empty() ? std::to_string(i) : d.labels[static_cast<std::size_t>(i)];
  };
  out << "label";
  for (Eigen::Index j = 0; j < n; ++j) out << ',' << label(j);
  out << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    out << label(i);
    for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(d.entries(i, j));
    out << '\n';
  }
}

DistanceMatrix read_distance_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path.string() + ": empty file");
  auto header = split(strip_cr(line));
  if (header.empty() || header[0] != "label") throw CsvError(path.string() + ": bad header");
  const auto n = static_cast<Eigen::Index>(header.size() - 1);
  DistanceMatrix d;
  d.entries.setZero(n, n);
  d.labels.assign(header.begin() + 1, header.end());
  std::size_t line_no = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw CsvError(path.string() + ": too few rows");
    ++line_no;
    const auto f = split(strip_cr(line));
    if (static_cast<Eigen::Index>(f.size()) != n + 1) {
      throw CsvError("line " + std::to_string(line_no) + ": wrong field count");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      d.entries(i, j) = parse_double(f[static_cast<std::size_t>(j + 1)], line_no);
    }
  }
  return d;
}

void write_mds_csv(const std::filesystem::path& path, const MdsResult& mds,
                   const std::vector<std::string>& labels) {
  auto out = open_out(path);
  out << "label";
  for (Eigen::Index k = 0; k < mds.coords.cols(); ++k) {
    out << ',' << (k == 0 ? std::string("x") : k == 1 ? std::string("y") : "z" + std::to_string(k));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < mds.coords.rows(); ++i) {
    out << (labels.empty() ? std::to_string(i) : labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < mds.coords.cols(); ++k) out << ',' << format_double(mds.coords(i, k));
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_out(path);
  for (int i = 0; i < data.input_dim(); ++i) out << (i ? "," : "") << 'x' << i;
  for (int i = 0; i < data.output_dim(); ++i) out << ",y" << i;
  out << '\n';
  for (Eigen::Index k = 0; k < data.inputs.cols(); ++k) {
    for (int i = 0; i < data.input_dim(); ++i) out << (i ? "," : "") << format_double(data.inputs(i, k));
    for (int i = 0; i < data.output_dim(); ++i) out << ',' << format_double(data.targets(i, k));
    out << '\n';
  }
}

}  // namespace reprdyn
