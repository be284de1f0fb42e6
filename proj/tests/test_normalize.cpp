#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "faser/normalize.hpp"
#include "support/helpers.hpp"

using namespace faser;
using faser::testing::make_raw;

namespace {

const RegisterTable& regs() {
  static RegisterTable t = RegisterTable::builtin();
  return t;
}

std::string norm_body(const std::string& body, bool rn, const std::string& arch = "x86-64",
                      uint64_t addr_min = kDefaultAddrMin,
                      OpcodeCategory cat = OpcodeCategory::other) {
  FunctionString fs;
  fs.label = "f";
  fs.meta.architecture = arch;
  fs.body = body;
  fs.token_count = static_cast<uint32_t>(count_tokens(body));
  fs.instr_token_counts = {static_cast<uint32_t>(fs.token_count)};
  fs.instr_calls = {cat == OpcodeCategory::call ? uint8_t(1) : uint8_t(0)};
  return normalize_function(fs, NormalizationMode{rn}, regs(), addr_min).body;
}

}  // namespace

TEST_CASE("base normalization of a stack frame prologue") {
  auto f = make_raw("entry", "x86-64",
                    {{"rbp,8,rsp,0,=[8],8,rsp,-=", OpcodeCategory::other},
                     {"4176,rip,8,rsp,-=,rsp,=[8],rip,=", OpcodeCategory::call},
                     {"0,0x8,rbp,-,=[4]", OpcodeCategory::other}});
  auto fs = to_function_string(f);
  CHECK(fs.body ==
        "rbp,8,rsp,0,=[8],8,rsp,-=,4176,rip,8,rsp,-=,rsp,=[8],rip,=,0,0x8,rbp,-,=[4]");
  auto n = normalize_function(fs, NormalizationMode{false}, regs());
  CHECK(n.body == "rbp,8,rsp,0,=[8],8,rsp,-=,FUNC,rip,8,rsp,-=,rsp,=[8],rip,=,0,IMM,rbp,-,=[4]");
  CHECK(n.token_count == fs.token_count);
}

TEST_CASE("register normalization widens x86-64 registers") {
  CHECK(norm_body("0,0x8,rbp,-,=[4]", true) == "0,IMM,reg64,-,=[4]");
  CHECK(norm_body("rbp,8,rsp,0,=[8],8,rsp,-=", true) == "reg64,8,reg64,0,=[8],8,reg64,-=");
  CHECK(norm_body("eax,rbx,+,=", true) == "reg32,reg64,+,=");
}

TEST_CASE("call targets become FUNC and plain large decimals DATA") {
  CHECK(norm_body("4176,rip,=", false, "x86-64", kDefaultAddrMin, OpcodeCategory::call) ==
        "FUNC,rip,=");
  CHECK(norm_body("4176,rax,=", false) == "DATA,rax,=");
  CHECK(norm_body("4095,rax,=", false) == "4095,rax,=");
  CHECK(norm_body("4096,rax,=", false) == "DATA,rax,=");
}

TEST_CASE("hex literal rules fire before the decimal rule") {
  CHECK(norm_body("0xfffff00,x,=", false) == "IMM,x,=");
  CHECK(norm_body("0xFFFFFabc123,x,=", false) == "IMM,x,=");
  CHECK(norm_body("0x1,x,=", false) == "IMM,x,=");
  CHECK(norm_body("0xabc,x,=", false) == "IMM,x,=");
  CHECK(norm_body("0x1234,x,=", false) == "MEM,x,=");
  CHECK(norm_body("0xDEADBEEF,x,=", false) == "MEM,x,=");
}

TEST_CASE("hex detection is case insensitive and strict") {
  CHECK(norm_body("0X1A,x,=", false) == "IMM,x,=");
  // Not valid hex digits; falls through untouched.
  CHECK(norm_body("0xZZ,x,=", false) == "0xZZ,x,=");
  CHECK(norm_body("0x,x,=", false) == "0x,x,=");
}

TEST_CASE("decimal rule respects the address floor and leading zeros") {
  CHECK(norm_body("0812,x,=", false) == "0812,x,=");
  CHECK(norm_body("004096,x,=", false) == "DATA,x,=");
  CHECK(norm_body("99999999999999999999999999,x,=", false) == "DATA,x,=");
  CHECK(norm_body("100,x,=", false, "x86-64", 50) == "DATA,x,=");
  CHECK(norm_body("100,x,=", false, "x86-64", 101) == "100,x,=");
}

TEST_CASE("register widths cover the built-in architectures") {
  CHECK(norm_body("r0,r1,+,=", true, "arm32") == "reg32,reg32,+,=");
  CHECK(norm_body("sp,lr,+,=", true, "arm32") == "reg32,reg32,+,=");
  CHECK(norm_body("x0,w1,+,=", true, "arm64") == "reg64,reg32,+,=");
  CHECK(norm_body("xzr,wzr,+,=", true, "arm64") == "reg64,reg32,+,=");
  CHECK(norm_body("t0,a0,+,=", true, "riscv32") == "reg32,reg32,+,=");
  CHECK(norm_body("v0,s3,+,=", true, "mips32") == "reg32,reg32,+,=");
  CHECK(norm_body("r8d,r8,+,=", true, "x86-64") == "reg32,reg64,+,=");
}

TEST_CASE("program counters and flags stay verbatim under renaming") {
  CHECK(norm_body("rip,=", true) == "rip,=");
  CHECK(norm_body("pc,=", true, "arm32") == "pc,=");
  CHECK(norm_body("zf,=", true) == "zf,=");
}

TEST_CASE("architecture names are canonicalized before table lookup") {
  CHECK(norm_body("rax,=", true, "X86_64") == "reg64,=");
  CHECK(norm_body("rax,=", true, "x8664") == "reg64,=");
}

TEST_CASE("renaming an architecture without a table is an error") {
  FunctionString fs;
  fs.label = "f";
  fs.meta.architecture = "vax";
  fs.body = "r0";
  fs.token_count = 1;
  CHECK_THROWS_AS(normalize_function(fs, NormalizationMode{true}, regs()), ContractError);
  // Base mode has no register dependence, so it passes.
  CHECK(normalize_function(fs, NormalizationMode{false}, regs()).body == "r0");
}

TEST_CASE("register table overrides extend and replace builtins") {
  faser::testing::TempDir tmp;
  auto path = tmp.file("regs.json");
  {
    std::ofstream out(path);
    out << R"({"vax":{"r0":32},"x86-64":{"rax":32}})";
  }
  RegisterTable t = RegisterTable::builtin();
  t.load_overrides(path);
  FunctionString fs;
  fs.label = "f";
  fs.meta.architecture = "vax";
  fs.body = "r0";
  fs.token_count = 1;
  CHECK(normalize_function(fs, NormalizationMode{true}, t).body == "reg32");
  fs.meta.architecture = "x86-64";
  fs.body = "rax,rbx";
  fs.token_count = 2;
  CHECK(normalize_function(fs, NormalizationMode{true}, t).body == "reg32,reg64");
}

TEST_CASE("normalization is idempotent and count preserving on random strings") {
  std::mt19937 rng(7);
  std::vector<std::string> atoms = {"rax",  "eax", "r0",    "x3",   "w9",   "0x1",  "0x12345",
                                    "0xfffff8", "42",  "4096",  "99999", "+",   "-",    "=[8]",
                                    "=",    "fn",  "DATA",  "IMM",  "MEM",  "FUNC", "0xzz",
                                    "sp",   "pc",  "rip",   "007",  "0",    "1",    "abc"};
  std::vector<std::string> arches = {"x86-64", "arm32", "arm64", "mips32", "riscv32"};
  for (int iter = 0; iter < 1000; ++iter) {
    size_t n = 1 + rng() % 12;
    std::vector<std::string> toks;
    for (size_t i = 0; i < n; ++i) toks.push_back(atoms[rng() % atoms.size()]);
    FunctionString fs;
    fs.label = "f";
    fs.meta.architecture = arches[rng() % arches.size()];
    fs.body = join_tokens(toks);
    fs.token_count = static_cast<uint32_t>(n);
    bool rn = rng() % 2 == 0;
    OpcodeCategory cat = rng() % 4 == 0 ? OpcodeCategory::call : OpcodeCategory::other;
    fs.instr_token_counts = {static_cast<uint32_t>(fs.token_count)};
    fs.instr_calls = {cat == OpcodeCategory::call ? uint8_t(1) : uint8_t(0)};
    auto once = normalize_function(fs, NormalizationMode{rn}, regs());
    CHECK(once.token_count == fs.token_count);
    FunctionString again;
    again.label = once.label;
    again.meta = once.meta;
    again.body = once.body;
    again.token_count = once.token_count;
    again.instr_token_counts = once.instr_token_counts;
    again.instr_calls = once.instr_calls;
    auto twice = normalize_function(again, NormalizationMode{rn}, regs());
    CHECK(twice.body == once.body);
  }
}

TEST_CASE("per instruction call category drives the FUNC split") {
  auto f = make_raw("fn", "x86-64",
                    {{"8192,rax,=", OpcodeCategory::other}, {"8192,rip,=", OpcodeCategory::call}});
  auto fs = to_function_string(f);
  auto n = normalize_function(fs, NormalizationMode{false}, regs());
  CHECK(n.body == "DATA,rax,=,FUNC,rip,=");
}
