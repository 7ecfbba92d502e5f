#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "itlc/json_io.hpp"
#include "support.hpp"

namespace itlc {
namespace {

struct CliRun {
  int code;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(ITLC_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

const std::string kFixture = ITLC_FIXTURE_DIR "/minimal5.json";

TEST(Cli, DecideValid) {
  const CliRun r = run("decide 'p -> p'");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "VALID\n");
}

TEST(Cli, DecideFalsifiableEmitsVerifiableCertificate) {
  const CliRun r = run("decide 'A(~p | <>p) -> (~<>p | <>p)' --format json");
  EXPECT_EQ(r.code, 1);
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(verify_certificate_json(j, parse(testing::kFlagship)).ok);
  EXPECT_EQ(run("--threads 4 decide 'A(~p | <>p) -> (~<>p | <>p)' --format json").out, r.out);

  const auto path = std::filesystem::temp_directory_path() / "itlc_cli_cert.json";
  write_json_file(path.string(), j);
  EXPECT_EQ(run("verify " + path.string() + " '" + testing::kFlagship + "'").code, 0);
  EXPECT_EQ(run("verify " + path.string() + " 'Xp -> p'").code, 1);
  std::filesystem::remove(path);
}

TEST(Cli, CheckReportsFailingPoint) {
  const CliRun r = run("check " + kFixture + " '(Xp -> Xq) -> X(p -> q)'");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out, "fails at {v}\n");
  EXPECT_EQ(run("check " + kFixture + " '<>p'").code, 0);
}

TEST(Cli, OtherCommands) {
  EXPECT_EQ(run("valid " + kFixture + " 'Ep -> <>p'").code, 0);
  EXPECT_EQ(run("countermodel 'Xp -> p' --max-points 2").code, 1);
  EXPECT_EQ(run("countermodel 'p -> p' --max-points 2").code, 0);
  const CliRun a = run("analyze " + kFixture + " --format json");
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(Json::parse(a.out), Json::parse(R"({"minimal":true,"recurrent":true,"connected":false})"));
  EXPECT_EQ(run("extract " + kFixture + " '(Xp -> Xq) -> X(p -> q)'").code, 1);
  EXPECT_EQ(run("enumerate --sigma p --format json").code, 0);
  EXPECT_EQ(run("enumerate --sigma '" + std::string(testing::kFlagship) + "' --max-moments 100").code, 3);
  const CliRun rs = run("random-system 4 --seed 3");
  EXPECT_EQ(rs.code, 0);
  EXPECT_EQ(rs.out, run("random-system 4 --seed 3").out);
  EXPECT_NO_THROW(model_from_json(Json::parse(rs.out)));
}

TEST(Cli, ErrorExitCodes) {
  EXPECT_EQ(run("decide 'p &'").code, 2);
  EXPECT_EQ(run("decide '[]p'").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("decide 'A(p | <>q) -> A<>q | Xp' --max-moments 2").code, 3);
}

}  // namespace
}  // namespace itlc
