#include "gridopt/case_io.hpp"
#include "gridopt/types.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gridopt/error.hpp"

namespace gridopt {

namespace {

bool same_value(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

bool same_table(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      if (!same_value(a(i, j), b(i, j))) return false;
  return true;
}

std::optional<double> parse_number(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  bool negative = false;
  if (tok.front() == '+' || tok.front() == '-') {
    negative = tok.front() == '-';
    tok.remove_prefix(1);
  }
  if (tok.empty() || tok.front() == '+' || tok.front() == '-')
    return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] =
      std::from_chars(tok.data(), tok.data() + tok.size(), v,
                      std::chars_format::general);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return negative ? -v : v;
}

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }
  void advance() {
    if (!eof()) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }
  std::size_t line() const { return line_; }

  void skip_comment() {
    while (!eof() && peek() != '\n') advance();
  }

  bool at_continuation() const {
    return text_.substr(pos_, 3) == "...";
  }

  /// Skips blanks, newlines, comments and empty statements.
  void skip_separators() {
    while (!eof()) {
      char c = peek();
      if (c == '%' || c == '#') {
        skip_comment();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' ||
                 c == ';' || c == ',') {
        advance();
      } else {
        break;
      }
    }
  }

  void skip_blanks() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r'))
      advance();
  }

  std::string_view read_identifier() {
    std::size_t start = pos_;
    while (!eof()) {
      char c = peek();
      bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                (c == '.' && pos_ > start);
      if (!ok) break;
      advance();
    }
    if (pos_ > start &&
        std::isdigit(static_cast<unsigned char>(text_[start]))) {
      pos_ = start;
      return {};
    }
    return text_.substr(start, pos_ - start);
  }

  std::string_view read_line() {
    std::size_t start = pos_;
    while (!eof() && peek() != '\n') advance();
    return text_.substr(start, pos_ - start);
  }

  std::string_view read_token() {
    std::size_t start = pos_;
    while (!eof()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',' ||
          c == ';' || c == ']' || c == '[' || c == '%' || c == '#')
        break;
      advance();
    }
    return text_.substr(start, pos_ - start);
  }

  void skip_string() {
    char quote = peek();
    advance();
    while (!eof() && peek() != quote && peek() != '\n') advance();
    if (peek() != quote) fail(ErrorCode::MalformedMatrix, "unterminated string");
    advance();
  }

  void skip_cell() {
    int depth = 0;
    do {
      char c = peek();
      if (eof()) fail(ErrorCode::MalformedMatrix, "unbalanced braces");
      if (c == '{') {
        ++depth;
        advance();
      } else if (c == '}') {
        --depth;
        advance();
      } else if (c == '\'' || c == '"') {
        skip_string();
      } else if (c == '%') {
        skip_comment();
      } else {
        advance();
      }
    } while (depth > 0);
  }

  /// Skips the remainder of a statement of unknown shape.
  void skip_statement() {
    while (!eof() && peek() != ';' && peek() != '\n') {
      if (peek() == '%') {
        skip_comment();
        return;
      }
      advance();
    }
  }

  Eigen::MatrixXd read_matrix() {
    advance();  // '['
    std::vector<std::vector<double>> rows;
    std::vector<double> row;
    auto finish_row = [&] {
      if (!row.empty()) rows.push_back(std::move(row));
      row.clear();
    };
    while (true) {
      if (eof()) fail(ErrorCode::MalformedMatrix, "unbalanced brackets");
      char c = peek();
      if (c == ']') {
        advance();
        finish_row();
        break;
      }
      if (c == '[') fail(ErrorCode::MalformedMatrix, "nested brackets");
      if (c == ';' || c == '\n') {
        advance();
        finish_row();
      } else if (c == '%' || c == '#') {
        skip_comment();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
        advance();
      } else if (at_continuation()) {
        skip_comment();
        advance();
      } else {
        std::string_view tok = read_token();
        auto v = parse_number(tok);
        if (!v)
          fail(ErrorCode::NumericParse,
               fmt::format("'{}' is not a number", tok));
        row.push_back(*v);
      }
    }
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    const std::size_t width = rows.front().size();
    Eigen::MatrixXd m(static_cast<Index>(rows.size()),
                      static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != width)
        fail(ErrorCode::MalformedMatrix,
             fmt::format("ragged row {} ({} columns, expected {})", i + 1,
                         rows[i].size(), width));
      for (std::size_t j = 0; j < width; ++j)
        m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return m;
  }

  [[noreturn]] void fail(ErrorCode code, const std::string& msg) const {
    throw Error(code, fmt::format("line {}: {}", line_, msg));
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r;");
  return std::string(s.substr(b, e - b + 1));
}

void validate(CaseData& c, bool have_base, bool have_bus, bool have_gen,
              bool have_branch) {
  if (!have_base) throw Error(ErrorCode::MissingTable, "baseMVA");
  if (!have_bus) throw Error(ErrorCode::MissingTable, "bus");
  if (!have_gen) throw Error(ErrorCode::MissingTable, "gen");
  if (!have_branch) throw Error(ErrorCode::MissingTable, "branch");
  if (!(c.base_mva > 0.0) || !std::isfinite(c.base_mva))
    throw Error(ErrorCode::InvalidCase, "baseMVA must be positive");
  for (char ch : c.name)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_')
      throw Error(ErrorCode::InvalidCase,
                  fmt::format("case name '{}' is not an identifier", c.name));

  // an empty table reads back at its minimum width
  auto check_width = [](Eigen::MatrixXd& m, Index min_cols,
                        const char* table) {
    if (m.rows() == 0) m.resize(0, min_cols);
    if (m.cols() < min_cols)
      throw Error(ErrorCode::MalformedMatrix,
                  fmt::format("{} has {} columns, at least {} required",
                              table, m.cols(), min_cols));
  };
  check_width(c.bus, kBusColumns, "bus");
  check_width(c.gen, kGenColumns, "gen");
  check_width(c.branch, kBranchColumns, "branch");
  if (c.gencost.rows() == 0)
    c.gencost.resize(0, 0);
  else
    check_width(c.gencost, kGencostColumns, "gencost");

  std::unordered_set<double> ids;
  for (Index i = 0; i < c.bus.rows(); ++i) {
    if (!ids.insert(c.bus(i, bus_col::BUS_I)).second)
      throw Error(ErrorCode::InvalidCase,
                  fmt::format("duplicate bus id {}", c.bus(i, bus_col::BUS_I)));
  }
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return fmt::format("{:.17g}", v);
}

void write_table(std::string& out, const char* name, const Eigen::MatrixXd& m) {
  out += fmt::format("mpc.{} = [\n", name);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out += '\t';
      out += format_number(m(i, j));
    }
    out += ";\n";
  }
  out += "];\n";
}

}  // namespace

bool operator==(const CaseData& a, const CaseData& b) {
  return a.name == b.name && same_value(a.base_mva, b.base_mva) &&
         same_table(a.bus, b.bus) && same_table(a.gen, b.gen) &&
         same_table(a.branch, b.branch) && same_table(a.gencost, b.gencost);
}

CaseData parse_case(std::string_view text) {
  Scanner sc(text);
  CaseData c;
  bool have_base = false, have_bus = false, have_gen = false,
       have_branch = false;

  while (true) {
    sc.skip_separators();
    if (sc.eof()) break;
    std::string_view ident = sc.read_identifier();
    if (ident.empty())
      sc.fail(ErrorCode::MalformedMatrix,
              fmt::format("unexpected character '{}'", sc.peek()));
    if (ident == "function") {
      std::string_view rest = sc.read_line();
      auto eq = rest.find('=');
      std::string_view tail = eq == std::string_view::npos ? rest : rest.substr(eq + 1);
      tail = tail.substr(0, tail.find('%'));
      c.name = trim(tail);
      continue;
    }
    sc.skip_blanks();
    if (sc.peek() != '=')
      sc.fail(ErrorCode::MalformedMatrix,
              fmt::format("expected '=' after '{}'", ident));
    sc.advance();
    sc.skip_blanks();

    auto dot = ident.rfind('.');
    std::string_view field =
        dot == std::string_view::npos ? ident : ident.substr(dot + 1);
    Eigen::MatrixXd* table = nullptr;
    bool* seen = nullptr;
    if (field == "bus") {
      table = &c.bus, seen = &have_bus;
    } else if (field == "gen") {
      table = &c.gen, seen = &have_gen;
    } else if (field == "branch") {
      table = &c.branch, seen = &have_branch;
    } else if (field == "gencost") {
      table = &c.gencost;
    }
    const bool is_base = field == "baseMVA";

    const char first = sc.peek();
    if (first == '[') {
      Eigen::MatrixXd m = sc.read_matrix();
      if (table) {
        *table = std::move(m);
        if (seen) *seen = true;
      } else if (is_base) {
        if (m.size() != 1)
          sc.fail(ErrorCode::MalformedMatrix, "baseMVA must be a scalar");
        c.base_mva = m(0, 0);
        have_base = true;
      }
    } else if (first == '{' || first == '\'' || first == '"') {
      if (table || is_base)
        sc.fail(ErrorCode::MalformedMatrix,
                fmt::format("'{}' must be numeric", field));
      if (first == '{')
        sc.skip_cell();
      else
        sc.skip_string();
    } else if (is_base) {
      std::string_view tok = sc.read_token();
      auto v = parse_number(tok);
      if (!v)
        sc.fail(ErrorCode::NumericParse,
                fmt::format("'{}' is not a number", tok));
      c.base_mva = *v;
      have_base = true;
    } else if (table) {
      sc.fail(ErrorCode::MalformedMatrix,
              fmt::format("'{}' must be a matrix", field));
    } else {
      sc.skip_statement();
    }
    sc.skip_blanks();
    if (sc.peek() == '%') sc.skip_comment();
    const char end = sc.peek();
    if (!sc.eof() && end != ';' && end != '\n' && end != ',')
      sc.fail(ErrorCode::MalformedMatrix,
              fmt::format("unexpected '{}' after assignment", end));
  }

  validate(c, have_base, have_bus, have_gen, have_branch);
  return c;
}

std::string write_case(const CaseData& c) {
  std::string out;
  if (!c.name.empty()) out += fmt::format("function mpc = {}\n", c.name);
  out += "\n%% MATPOWER Case Format : Version 2\nmpc.version = '2';\n\n";
  out += fmt::format("mpc.baseMVA = {};\n\n", format_number(c.base_mva));
  write_table(out, "bus", c.bus);
  out += '\n';
  write_table(out, "gen", c.gen);
  out += '\n';
  write_table(out, "branch", c.branch);
  if (c.gencost.size() > 0) {
    out += '\n';
    write_table(out, "gencost", c.gencost);
  }
  return out;
}

namespace {

using nlohmann::json;

json table_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      if (std::isfinite(v))
        row.push_back(v);
      else
        row.push_back(format_number(v));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double json_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    if (auto parsed = parse_number(v.get<std::string>())) return *parsed;
  }
  throw Error(ErrorCode::NumericParse, fmt::format("{} is not a number",
                                                   v.dump()));
}

Eigen::MatrixXd json_to_table(const json& rows, const char* name) {
  if (!rows.is_array())
    throw Error(ErrorCode::MalformedMatrix,
                fmt::format("{} must be an array of rows", name));
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  if (!rows.front().is_array())
    throw Error(ErrorCode::MalformedMatrix,
                fmt::format("{} must be an array of rows", name));
  const std::size_t width = rows.front().size();
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    if (!row.is_array() || row.size() != width)
      throw Error(ErrorCode::MalformedMatrix,
                  fmt::format("ragged row {} in {}", i + 1, name));
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = json_number(row[j]);
  }
  return m;
}

}  // namespace

CaseData parse_case_json(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw Error(ErrorCode::MalformedMatrix, "not a JSON object");
  CaseData c;
  if (doc.contains("name") && doc["name"].is_string())
    c.name = doc["name"].get<std::string>();
  const bool have_base = doc.contains("baseMVA");
  if (have_base) c.base_mva = json_number(doc["baseMVA"]);
  auto table = [&](const char* key, Eigen::MatrixXd& dst) {
    if (!doc.contains(key)) return false;
    dst = json_to_table(doc[key], key);
    return true;
  };
  bool have_bus = table("bus", c.bus);
  bool have_gen = table("gen", c.gen);
  bool have_branch = table("branch", c.branch);
  table("gencost", c.gencost);
  validate(c, have_base, have_bus, have_gen, have_branch);
  return c;
}

std::string write_case_json(const CaseData& c) {
  json doc;
  doc["name"] = c.name;
  doc["baseMVA"] = c.base_mva;
  doc["bus"] = table_to_json(c.bus);
  doc["gen"] = table_to_json(c.gen);
  doc["branch"] = table_to_json(c.branch);
  doc["gencost"] = table_to_json(c.gencost);
  return doc.dump(1, '\t') + "\n";
}

CaseData load_case(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoFailure,
                fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  CaseData c = path.extension() == ".json" ? parse_case_json(text)
                                           : parse_case(text);
  if (c.name.empty()) c.name = path.stem().string();
  return c;
}

void save_case(const std::filesystem::path& path, const CaseData& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::IoFailure,
                fmt::format("cannot write '{}'", path.string()));
  out << (path.extension() == ".json" ? write_case_json(c) : write_case(c));
  if (!out)
    throw Error(ErrorCode::IoFailure,
                fmt::format("write to '{}' failed", path.string()));
}

}  // namespace gridopt
