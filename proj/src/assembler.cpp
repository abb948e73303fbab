#include "tilesim/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>

#include "tilesim/errors.hpp"

namespace tilesim::assembler {

using isa::Format;
using isa::Instruction;
using isa::Op;

namespace {

const std::map<std::string, Op, std::less<>>& mnemonic_table() {
  static const std::map<std::string, Op, std::less<>> table = [] {
    std::map<std::string, Op, std::less<>> t;
    for (int i = int(Op::kLui); i <= int(Op::kFsub); ++i) {
      Op op = Op(i);
      t.emplace(std::string(isa::mnemonic(op)), op);
    }
    return t;
  }();
  return table;
}

std::string strip(std::string s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::string last = strip(cur);
  if (!last.empty()) out.push_back(last);
  return out;
}

bool is_label_name(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(uint8_t(s[0])) && s[0] != '_' && s[0] != '.') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(uint8_t(c)) || c == '_' || c == '.';
  });
}

int parse_reg(const std::string& tok, int line) {
  if (tok.size() >= 2 && tok[0] == 'x') {
    char* end = nullptr;
    long v = std::strtol(tok.c_str() + 1, &end, 10);
    if (end && *end == '\0' && v >= 0 && v <= 31) return int(v);
  }
  throw AsmError(line, "expected a register x0..x31, got '" + tok + "'");
}

int64_t parse_int(const std::string& tok, int line) {
  if (tok.empty()) throw AsmError(line, "expected a number");
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(tok.c_str(), &end, 0);
  if (errno != 0 || !end || *end != '\0')
    throw AsmError(line, "malformed number '" + tok + "'");
  return v;
}

// "imm(rs1)" for loads, stores and jalr.
std::pair<int64_t, int> parse_mem_operand(const std::string& tok, int line) {
  size_t open = tok.find('(');
  size_t close = tok.find(')');
  if (open == std::string::npos || close == std::string::npos || close < open ||
      close != tok.size() - 1) {
    throw AsmError(line, "expected imm(reg), got '" + tok + "'");
  }
  std::string immtok = strip(tok.substr(0, open));
  if (immtok.empty()) immtok = "0";
  int64_t imm = parse_int(immtok, line);
  int reg = parse_reg(strip(tok.substr(open + 1, close - open - 1)), line);
  return {imm, reg};
}

struct Statement {
  int line = 0;
  uint32_t addr = 0;
  bool is_word_directive = false;
  uint32_t literal = 0;  // for .word
  Op op = Op::kInvalid;
  std::vector<std::string> operands;
};

void check_imm32(int64_t v, int line) {
  if (v < INT32_MIN || v > int64_t(UINT32_MAX))
    throw AsmError(line, "value does not fit in 32 bits");
}

}  // namespace

std::vector<Segment> assemble(const std::string& text) {
  std::map<std::string, uint32_t> labels;
  std::vector<Statement> stmts;
  std::vector<uint32_t> segment_starts;  // statement indices that begin segments

  // Pass 1: layout and label collection.
  uint32_t addr = 0;
  bool at_segment_start = true;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    lineno++;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = strip(raw);

    // Leading labels, possibly several, possibly followed by a statement.
    while (true) {
      size_t colon = line.find(':');
      if (colon == std::string::npos) break;
      std::string name = strip(line.substr(0, colon));
      if (!is_label_name(name)) throw AsmError(lineno, "bad label name '" + name + "'");
      if (labels.count(name)) throw AsmError(lineno, "duplicate label '" + name + "'");
      labels[name] = addr;
      line = strip(line.substr(colon + 1));
    }
    if (line.empty()) continue;

    std::istringstream ls(line);
    std::string head;
    ls >> head;
    std::string rest = strip(line.substr(head.size()));

    if (head == ".org") {
      int64_t v = parse_int(rest, lineno);
      if (v < 0 || v > 0xFFFF || (v & 3))
        throw AsmError(lineno, ".org needs a word-aligned address inside the 64 KB "
                               "instruction region");
      addr = uint32_t(v);
      at_segment_start = true;
      continue;
    }

    Statement st;
    st.line = lineno;
    st.addr = addr;
    if (head == ".word") {
      int64_t v = parse_int(rest, lineno);
      check_imm32(v, lineno);
      st.is_word_directive = true;
      st.literal = uint32_t(v);
    } else if (head == "nop") {
      st.op = Op::kAddi;
      st.operands = {"x0", "x0", "0"};
    } else if (head == "ret") {
      st.op = Op::kJalr;
      st.operands = {"x0", "0(x0)"};
    } else {
      auto it = mnemonic_table().find(head);
      if (it == mnemonic_table().end())
        throw AsmError(lineno, "unknown mnemonic '" + head + "'");
      st.op = it->second;
      st.operands = split_operands(rest);
    }
    if (at_segment_start) {
      segment_starts.push_back(uint32_t(stmts.size()));
      at_segment_start = false;
    }
    stmts.push_back(std::move(st));
    if (addr + 4 > 0x10000)
      throw AsmError(lineno, "program overruns the 64 KB instruction region");
    addr += 4;
  }

  // Pass 2: encoding with resolved labels.
  auto resolve_target = [&](const std::string& tok, uint32_t pc, int line) -> int32_t {
    auto it = labels.find(tok);
    if (it != labels.end()) return int32_t(it->second - pc);
    if (!tok.empty() && (std::isdigit(uint8_t(tok[0])) || tok[0] == '-' || tok[0] == '+'))
      return int32_t(parse_int(tok, line));
    throw AsmError(line, "unresolved label '" + tok + "'");
  };
  auto want = [&](const Statement& st, size_t n) {
    if (st.operands.size() != n) {
      std::ostringstream os;
      os << isa::mnemonic(st.op) << " expects " << n << " operand(s), got "
         << st.operands.size();
      throw AsmError(st.line, os.str());
    }
  };

  std::vector<Segment> segments;
  size_t next_start = 0;
  for (size_t i = 0; i < stmts.size(); ++i) {
    const Statement& st = stmts[i];
    if (next_start < segment_starts.size() && segment_starts[next_start] == i) {
      segments.push_back({st.addr, {}});
      next_start++;
    }

    uint32_t word;
    if (st.is_word_directive) {
      word = st.literal;
    } else {
      Instruction ins;
      ins.op = st.op;
      try {
        switch (isa::format_of(st.op)) {
          case Format::kR:
            want(st, 3);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            ins.rs1 = uint8_t(parse_reg(st.operands[1], st.line));
            ins.rs2 = uint8_t(parse_reg(st.operands[2], st.line));
            break;
          case Format::kI:
          case Format::kIShift: {
            want(st, 3);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            ins.rs1 = uint8_t(parse_reg(st.operands[1], st.line));
            int64_t v = parse_int(st.operands[2], st.line);
            check_imm32(v, st.line);
            ins.imm = int32_t(v);
            break;
          }
          case Format::kLoad: {
            want(st, 2);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            auto [imm, rs1] = parse_mem_operand(st.operands[1], st.line);
            ins.rs1 = uint8_t(rs1);
            ins.imm = int32_t(imm);
            break;
          }
          case Format::kStore: {
            want(st, 2);
            ins.rs2 = uint8_t(parse_reg(st.operands[0], st.line));
            auto [imm, rs1] = parse_mem_operand(st.operands[1], st.line);
            ins.rs1 = uint8_t(rs1);
            ins.imm = int32_t(imm);
            break;
          }
          case Format::kJalr: {
            want(st, 2);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            auto [imm, rs1] = parse_mem_operand(st.operands[1], st.line);
            ins.rs1 = uint8_t(rs1);
            ins.imm = int32_t(imm);
            break;
          }
          case Format::kBranch:
            want(st, 3);
            ins.rs1 = uint8_t(parse_reg(st.operands[0], st.line));
            ins.rs2 = uint8_t(parse_reg(st.operands[1], st.line));
            ins.imm = resolve_target(st.operands[2], st.addr, st.line);
            break;
          case Format::kJal:
            want(st, 2);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            ins.imm = resolve_target(st.operands[1], st.addr, st.line);
            break;
          case Format::kU: {
            want(st, 2);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            int64_t v = parse_int(st.operands[1], st.line);
            if (v < -0x80000 || v > 0xFFFFF)
              throw AsmError(st.line, "upper immediate outside 20 bits");
            ins.imm = int32_t(uint32_t(v) << 12);
            break;
          }
          case Format::kSend:
            want(st, 2);
            ins.rs1 = uint8_t(parse_reg(st.operands[0], st.line));
            ins.rs2 = uint8_t(parse_reg(st.operands[1], st.line));
            break;
          case Format::kRecv:
            want(st, 1);
            ins.rd = uint8_t(parse_reg(st.operands[0], st.line));
            if (ins.rd > 30)
              throw AsmError(st.line,
                             "recv writes a register pair; destination must be x30 "
                             "or lower");
            break;
        }
        word = isa::encode(ins);
      } catch (const EncodingRangeError& e) {
        throw AsmError(st.line, e.what());
      }
    }
    segments.back().words.push_back(word);
  }

  // Segments must not overlap one another.
  std::vector<std::pair<uint32_t, uint32_t>> spans;
  for (const Segment& s : segments)
    spans.emplace_back(s.base, s.base + uint32_t(s.words.size()) * 4);
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second)
      throw AsmError(0, "segments overlap at address 0x" +
                            [&] {
                              std::ostringstream os;
                              os << std::hex << spans[i].first;
                              return os.str();
                            }());
  }
  return segments;
}

std::string format_instruction(const Instruction& ins) {
  std::ostringstream os;
  os << isa::mnemonic(ins.op) << " ";
  auto reg = [](unsigned r) { return "x" + std::to_string(r); };
  switch (isa::format_of(ins.op)) {
    case Format::kR:
      os << reg(ins.rd) << ", " << reg(ins.rs1) << ", " << reg(ins.rs2);
      break;
    case Format::kI:
    case Format::kIShift:
      os << reg(ins.rd) << ", " << reg(ins.rs1) << ", " << ins.imm;
      break;
    case Format::kLoad:
    case Format::kJalr:
      os << reg(ins.rd) << ", " << ins.imm << "(" << reg(ins.rs1) << ")";
      break;
    case Format::kStore:
      os << reg(ins.rs2) << ", " << ins.imm << "(" << reg(ins.rs1) << ")";
      break;
    case Format::kBranch:
      os << reg(ins.rs1) << ", " << reg(ins.rs2) << ", " << ins.imm;
      break;
    case Format::kJal:
      os << reg(ins.rd) << ", " << ins.imm;
      break;
    case Format::kU:
      os << reg(ins.rd) << ", 0x" << std::hex << ((uint32_t(ins.imm) >> 12) & 0xFFFFF);
      break;
    case Format::kSend:
      os << reg(ins.rs1) << ", " << reg(ins.rs2);
      break;
    case Format::kRecv:
      os << reg(ins.rd);
      break;
  }
  return os.str();
}

std::string disassemble(const std::vector<Segment>& segments) {
  std::ostringstream out;
  for (const Segment& s : segments) {
    out << ".org 0x" << std::hex << s.base << std::dec << "\n";
    for (uint32_t w : s.words) {
      Instruction ins = isa::decode(w);
      if (!ins.valid()) {
        out << "  .word 0x" << std::hex << w << std::dec << "\n";
      } else {
        out << "  " << format_instruction(ins) << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace tilesim::assembler
