#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "gridopt/case_io.hpp"
#include "gridopt/error.hpp"
#include "test_util.hpp"

using namespace gridopt;

namespace {

const char* kMinimal = R"(mpc.baseMVA = 100;
mpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9];
mpc.gen = [1 0 0 100 -100 1 100 1 500 0];
mpc.branch = [1 1 0 0.1 0 0 0 0 0 0 1 -360 360];
)";

ErrorCode code_of(std::string_view text) {
  try {
    parse_case(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidCase;
}

}  // namespace

TEST_CASE("minimal case") {
  const CaseData c = parse_case(kMinimal);
  CHECK(c.base_mva == 100);
  CHECK(c.bus.rows() == 1);
  CHECK(c.gen.rows() == 1);
  CHECK(c.branch.rows() == 1);
  CHECK(c.gencost.rows() == 0);
}

TEST_CASE("standard fixtures parse with their table sizes") {
  const CaseData c118 = load_case(test::data_path("case118.m"));
  CHECK(c118.name == "case118");
  CHECK(c118.bus.rows() == 118);
  CHECK(c118.gen.rows() == 54);
  CHECK(c118.branch.rows() == 186);
  CHECK(c118.gencost.rows() == 54);
  const CaseData c14 = load_case(test::data_path("case14.m"));
  CHECK(c14.bus.rows() == 14);
  CHECK(c14.bus.cols() == 13);
}

TEST_CASE("grammar details") {
  const CaseData c = parse_case(R"(function mpc = tiny
% a comment ] [ with brackets
mpc.version = '2';
mpc.baseMVA = 1e2;   % trailing comment
mpc.bus = [
	1	3	+1.5E1	0	0	0	1	1	0	230	1	1.1	0.9;  % row comment
];
mpc.bus_name = {
	'Bus 1';
};
mpc.gen = [1, 0, 0, 100, -100, 1, 100, 1, Inf, -Inf];
mpc.branch = [1 1 0 0.1 ...
  0 0 0 0 0 0 1 -360 360];
mpc.gencost = [2 0 0 3 1.5e-3 20 0; 2 0 0 3 0.01 40 0];
mpc.unrelated = 7;
)");
  CHECK(c.name == "tiny");
  CHECK(c.base_mva == 100);
  CHECK(c.bus(0, 2) == 15);
  CHECK(std::isinf(c.gen(0, 8)));
  CHECK(c.gen(0, 9) < 0);
  CHECK(c.branch.cols() == 13);
  CHECK(c.gencost.rows() == 2);
  CHECK(c.gencost(0, 4) == 1.5e-3);
}

TEST_CASE("typed errors") {
  CHECK(code_of("mpc.baseMVA = 100; mpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9];"
                "mpc.gen = [1 0 0 100 -100 1 100 1 500 0];") ==
        ErrorCode::MissingTable);
  CHECK(code_of("mpc.baseMVA = 100; mpc.bus = [1 2 3; 4 5];") ==
        ErrorCode::MalformedMatrix);
  CHECK(code_of("mpc.baseMVA = 100; mpc.bus = [1 2 3; 4 5 6;") ==
        ErrorCode::MalformedMatrix);
  CHECK(code_of("mpc.baseMVA = 100; mpc.bus = [1 2 3]];") ==
        ErrorCode::MalformedMatrix);
  CHECK(code_of("mpc.baseMVA = 100; mpc.bus = [1 2 x3];") ==
        ErrorCode::NumericParse);
  CHECK(code_of("mpc.baseMVA = abc;") == ErrorCode::NumericParse);
  CHECK(code_of("mpc.baseMVA = 100; mpc.bus = [1 3 0];"
                "mpc.gen = [1 0 0 100 -100 1 100 1 500 0];"
                "mpc.branch = [1 1 0 0.1 0 0 0 0 0 0 1 -360 360];") ==
        ErrorCode::MalformedMatrix);
  CHECK(code_of("mpc.baseMVA = 0; mpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9];"
                "mpc.gen = [1 0 0 100 -100 1 100 1 500 0];"
                "mpc.branch = [1 1 0 0.1 0 0 0 0 0 0 1 -360 360];") ==
        ErrorCode::InvalidCase);
  CHECK(code_of("mpc.baseMVA = 100;"
                "mpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;"
                "           1 1 0 0 0 0 1 1 0 230 1 1.1 0.9];"
                "mpc.gen = [1 0 0 100 -100 1 100 1 500 0];"
                "mpc.branch = [1 1 0 0.1 0 0 0 0 0 0 1 -360 360];") ==
        ErrorCode::InvalidCase);
}

TEST_CASE("round trip at full precision") {
  for (const char* name : {"case9.m", "case14.m", "case30.m", "case118.m"}) {
    const CaseData c = load_case(test::data_path(name));
    CHECK(parse_case(write_case(c)) == c);
    CHECK(parse_case_json(write_case_json(c)) == c);
  }
  CaseData c = test::one_bus_case(100.0 / 3.0, 1.5e-3);
  c.gen(0, gen_col::PMAX) = std::numeric_limits<double>::infinity();
  c.bus(0, bus_col::VA) = 0.1 + 0.2;
  const CaseData back = parse_case(write_case(c));
  CHECK(back == c);
  CHECK(back.gencost(0, 4) == 1.5e-3);
  CHECK(back.bus(0, bus_col::PD) == 100.0 / 3.0);
}

TEST_CASE("empty gencost is omitted") {
  CaseData c = parse_case(kMinimal);
  const std::string text = write_case(c);
  CHECK(text.find("gencost") == std::string::npos);
  CHECK(parse_case(text).gencost.size() == 0);
}

TEST_CASE("extra columns survive the round trip") {
  CaseData c = parse_case(kMinimal);
  Eigen::MatrixXd bus(1, 17);
  bus << c.bus, 1.25, 2.5, -3, 4e-9;
  c.bus = bus;
  const CaseData back = parse_case(write_case(c));
  CHECK(back.bus.cols() == 17);
  CHECK(back == c);
}

TEST_CASE("file dispatch by extension") {
  const auto dir = std::filesystem::temp_directory_path() / "gridopt_io_test";
  std::filesystem::create_directories(dir);
  const CaseData c = load_case(test::data_path("case9.m"));
  save_case(dir / "c9.json", c);
  save_case(dir / "c9.m", c);
  CHECK(load_case(dir / "c9.json") == c);
  CHECK(load_case(dir / "c9.m") == c);
  std::filesystem::remove_all(dir);
}

TEST_CASE("case names must be identifiers") {
  const std::string body =
      "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9];\n"
      "mpc.gen = [1 0 0 100 -100 1 100 1 500 0];\n"
      "mpc.branch = [];\n";
  CHECK(parse_case("function mpc = case_7a % seven\n" + body).name == "case_7a");
  CHECK(code_of("function mpc = two words\n" + body) == ErrorCode::InvalidCase);
  CHECK(code_of("function mpc = caf\xe9\n" + body) == ErrorCode::InvalidCase);

  CaseData c = test::one_bus_case(10, 1);
  c.name = "bad name";
  std::string json = write_case_json(c);
  try {
    parse_case_json(json);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidCase);
  }
}
