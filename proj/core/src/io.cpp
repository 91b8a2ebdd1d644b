#include "cautious/io.hpp"

#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cautious {

std::string format_double(double value) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::runtime_error("parse_double: not a double: '" + text + "'");
  }
  if (!std::isfinite(value)) {
    throw std::runtime_error("parse_double: non-finite value: '" + text + "'");
  }
  return value;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

/// Line-oriented reader that tracks position for error messages.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open: " + path.string());
  }

  std::string next_line() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file");
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << path_.string() << ":" << line_no_ + 1 << ": " << what;
    throw std::runtime_error(os.str());
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

std::vector<double> parse_row(LineReader& reader, std::size_t expected) {
  const std::string line = reader.next_line();
  const auto fields = split_fields(line);
  if (fields.size() != expected) {
    std::ostringstream os;
    os << "expected " << expected << " values, found " << fields.size();
    reader.fail(os.str());
  }
  std::vector<double> row(expected);
  for (std::size_t i = 0; i < expected; ++i) row[i] = parse_double(fields[i]);
  return row;
}

std::size_t parse_size(LineReader& reader, const std::string& text) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    reader.fail("not a non-negative integer: '" + text + "'");
  }
  return value;
}

void expect_header(LineReader& reader, const std::string& magic) {
  const std::string line = reader.next_line();
  if (line != magic) reader.fail("expected header '" + magic + "', found '" + line + "'");
}

std::pair<std::size_t, std::size_t> parse_dims(LineReader& reader) {
  const auto fields = split_fields(reader.next_line());
  if (fields.size() != 2) reader.fail("expected 'n_states n_actions'");
  return {parse_size(reader, fields[0]), parse_size(reader, fields[1])};
}

void append_row(std::string& out, const double* values, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  out += '\n';
}

}  // namespace

void write_mdp(const std::filesystem::path& path, const TabularMdp& mdp) {
  std::string out = "CAUTIOUS-MDP v1\n";
  out += std::to_string(mdp.n_states) + " " + std::to_string(mdp.n_actions) + "\n";
  out += format_double(mdp.discount) + "\n";
  append_row(out, mdp.initial_dist.data(), mdp.initial_dist.size());
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      append_row(out, mdp.transition.slice(s, a).data(), mdp.n_states);
    }
  }
  atomic_write_text(path, out);
}

TabularMdp read_mdp(const std::filesystem::path& path) {
  LineReader reader(path);
  expect_header(reader, "CAUTIOUS-MDP v1");
  auto [n_states, n_actions] = parse_dims(reader);
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  const auto discount_row = parse_row(reader, 1);
  mdp.discount = discount_row[0];
  mdp.initial_dist = parse_row(reader, n_states);
  mdp.transition = Tensor3(n_states, n_actions, n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto row = parse_row(reader, n_states);
      auto dst = mdp.transition.slice(s, a);
      for (std::size_t t = 0; t < n_states; ++t) dst[t] = row[t];
    }
  }
  const auto report = validate_mdp(mdp);
  if (!report.ok()) {
    throw std::runtime_error(path.string() + ": invalid MDP: " + report.joined());
  }
  return mdp;
}

void write_reward(const std::filesystem::path& path, const RewardTable& reward) {
  std::string out = "CAUTIOUS-REW v1\n";
  out += std::to_string(reward.n_states()) + " " + std::to_string(reward.n_actions()) + "\n";
  out += format_double(reward.bound) + "\n";
  for (std::size_t s = 0; s < reward.n_states(); ++s) {
    for (std::size_t a = 0; a < reward.n_actions(); ++a) {
      append_row(out, reward.values.slice(s, a).data(), reward.values.dim2());
    }
  }
  atomic_write_text(path, out);
}

RewardTable read_reward(const std::filesystem::path& path) {
  LineReader reader(path);
  expect_header(reader, "CAUTIOUS-REW v1");
  auto [n_states, n_actions] = parse_dims(reader);
  RewardTable reward;
  const auto bound_row = parse_row(reader, 1);
  reward.bound = bound_row[0];
  reward.values = Tensor3(n_states, n_actions, n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto row = parse_row(reader, n_states);
      auto dst = reward.values.slice(s, a);
      for (std::size_t t = 0; t < n_states; ++t) dst[t] = row[t];
    }
  }
  return reward;
}

void write_policy(const std::filesystem::path& path, const StationaryPolicy& policy) {
  std::string out = "CAUTIOUS-POL v1\n";
  out += std::to_string(policy.n_states()) + " " + std::to_string(policy.n_actions()) + "\n";
  for (std::size_t s = 0; s < policy.n_states(); ++s) {
    append_row(out, policy.probs.row(s).data(), policy.n_actions());
  }
  atomic_write_text(path, out);
}

StationaryPolicy read_policy(const std::filesystem::path& path) {
  LineReader reader(path);
  expect_header(reader, "CAUTIOUS-POL v1");
  auto [n_states, n_actions] = parse_dims(reader);
  StationaryPolicy policy{Matrix(n_states, n_actions)};
  for (std::size_t s = 0; s < n_states; ++s) {
    const auto row = parse_row(reader, n_actions);
    for (std::size_t a = 0; a < n_actions; ++a) policy.probs(s, a) = row[a];
  }
  return policy;
}

}  // namespace cautious
