/*
 * Copyright (C) 2026 The DexWeaver Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dexweaver/microasm.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <vector>

namespace dexweaver {

namespace {

[[noreturn]] void syntax_error(size_t line, const std::string& message) {
  fail(ErrorKind::SyntaxError, "line " + std::to_string(line) + ": " + message);
}

struct Token {
  std::string text;
  bool is_string = false;  // came from a quoted literal
};

// Splits one line into tokens. Commas and braces separate; quoted strings
// keep their spaces and support \" \\ \n \t escapes.
std::vector<Token> tokenize(const std::string& line, size_t line_no) {
  std::vector<Token> tokens;
  size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == ',' ) {
      i++;
      continue;
    }
    if (c == '{' || c == '}') {
      tokens.push_back({std::string(1, c), false});
      i++;
      continue;
    }
    if (c == '"') {
      std::string value;
      i++;
      bool closed = false;
      while (i < line.size()) {
        char d = line[i++];
        if (d == '"') {
          closed = true;
          break;
        }
        if (d == '\\') {
          if (i >= line.size()) syntax_error(line_no, "dangling escape in string");
          char e = line[i++];
          switch (e) {
            case 'n': value.push_back('\n'); break;
            case 't': value.push_back('\t'); break;
            case '"': value.push_back('"'); break;
            case '\\': value.push_back('\\'); break;
            default: syntax_error(line_no, "unknown escape in string");
          }
        } else {
          value.push_back(d);
        }
      }
      if (!closed) syntax_error(line_no, "unterminated string literal");
      tokens.push_back({value, true});
      continue;
    }
    size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != ',' &&
           line[i] != '{' && line[i] != '}' && line[i] != '#') {
      i++;
    }
    tokens.push_back({line.substr(start, i - start), false});
  }
  return tokens;
}

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

uint16_t parse_register(const std::string& token, size_t line_no) {
  if (token.size() < 2 || token[0] != 'v') {
    syntax_error(line_no, "expected register v0..v255, got '" + token + "'");
  }
  int value = 0;
  for (size_t i = 1; i < token.size(); i++) {
    if (!isdigit(static_cast<unsigned char>(token[i]))) {
      syntax_error(line_no, "expected register v0..v255, got '" + token + "'");
    }
    value = value * 10 + (token[i] - '0');
    if (value > 255) syntax_error(line_no, "register out of range: '" + token + "'");
  }
  return static_cast<uint16_t>(value);
}

int32_t parse_literal(const std::string& token, size_t line_no) {
  try {
    size_t consumed = 0;
    long long value = std::stoll(token, &consumed, 0);
    if (consumed != token.size()) throw std::invalid_argument(token);
    if (value < INT32_MIN || value > INT32_MAX) throw std::out_of_range(token);
    return static_cast<int32_t>(value);
  } catch (const std::exception&) {
    syntax_error(line_no, "bad integer literal '" + token + "'");
  }
}

// Splits "Lapi/Gps;->getLocation(I)I" into class, name, params, return.
struct MethodDesc {
  std::string class_descriptor;
  std::string name;
  std::vector<std::string> params;
  std::string return_type;
};

std::vector<std::string> parse_type_list(const std::string& text, size_t line_no) {
  std::vector<std::string> types;
  size_t i = 0;
  while (i < text.size()) {
    size_t start = i;
    while (i < text.size() && text[i] == '[') i++;
    if (i >= text.size()) syntax_error(line_no, "dangling array marker in descriptor");
    char c = text[i];
    if (c == 'L') {
      size_t semi = text.find(';', i);
      if (semi == std::string::npos) syntax_error(line_no, "unterminated class descriptor");
      i = semi + 1;
    } else if (c == 'Z' || c == 'B' || c == 'S' || c == 'C' || c == 'I') {
      i++;
    } else if (c == 'J' || c == 'D' || c == 'F') {
      syntax_error(line_no, "wide/float types are outside the supported subset");
    } else {
      syntax_error(line_no, std::string("bad type descriptor character '") + c + "'");
    }
    types.push_back(text.substr(start, i - start));
  }
  return types;
}

std::string parse_single_type(const std::string& text, size_t line_no, bool allow_void) {
  if (allow_void && text == "V") return text;
  std::vector<std::string> types = parse_type_list(text, line_no);
  if (types.size() != 1) syntax_error(line_no, "expected one type descriptor");
  return types[0];
}

MethodDesc parse_method_ref(const std::string& token, size_t line_no) {
  size_t arrow = token.find("->");
  size_t paren = token.find('(');
  size_t close = token.find(')');
  if (arrow == std::string::npos || paren == std::string::npos ||
      close == std::string::npos || paren > close || arrow > paren) {
    syntax_error(line_no, "bad method reference '" + token + "'");
  }
  MethodDesc desc;
  desc.class_descriptor = token.substr(0, arrow);
  if (desc.class_descriptor.empty() || desc.class_descriptor[0] != 'L' ||
      desc.class_descriptor.back() != ';') {
    syntax_error(line_no, "method class must be a reference type");
  }
  desc.name = token.substr(arrow + 2, paren - arrow - 2);
  if (desc.name.empty()) syntax_error(line_no, "empty method name");
  desc.params = parse_type_list(token.substr(paren + 1, close - paren - 1), line_no);
  desc.return_type = parse_single_type(token.substr(close + 1), line_no, true);
  return desc;
}

uint32_t parse_access_flags(const std::vector<Token>& tokens, size_t first, size_t last,
                            size_t line_no) {
  uint32_t flags = 0;
  for (size_t i = first; i < last; i++) {
    const std::string& w = tokens[i].text;
    if (w == "public") flags |= kAccPublic;
    else if (w == "private") flags |= kAccPrivate;
    else if (w == "protected") flags |= kAccProtected;
    else if (w == "static") flags |= kAccStatic;
    else if (w == "final") flags |= kAccFinal;
    else if (w == "native") flags |= kAccNative;
    else if (w == "abstract") flags |= kAccAbstract;
    else if (w == "constructor") flags |= kAccConstructor;
    else syntax_error(line_no, "unknown access flag '" + w + "'");
  }
  return flags;
}

std::string access_flags_text(uint32_t flags) {
  std::string out;
  auto add = [&](uint32_t bit, const char* word) {
    if (flags & bit) {
      out += word;
      out += ' ';
    }
  };
  add(kAccPublic, "public");
  add(kAccPrivate, "private");
  add(kAccProtected, "protected");
  add(kAccStatic, "static");
  add(kAccFinal, "final");
  add(kAccNative, "native");
  add(kAccAbstract, "abstract");
  add(kAccConstructor, "constructor");
  return out;
}

struct PendingTry {
  std::string start_label;
  std::string end_label;
  bool catch_all = false;
  std::string type_descriptor;
  std::string handler_label;
  size_t line_no = 0;
};

struct PendingBranchRef {
  uint32_t insn_index;
  std::string label;
  size_t line_no;
};

}  // namespace

DexFile assemble(const std::string& source) {
  DexFile dex;
  Interner interner(dex);
  interner.type("Ljava/lang/Object;");

  std::istringstream stream(source);
  std::string line;
  size_t line_no = 0;

  struct MethodState {
    MethodDesc desc;
    uint32_t access_flags = 0;
    CodeItem code;
    bool registers_seen = false;
    std::map<std::string, uint32_t> labels;  // label -> instruction index
    std::vector<PendingBranchRef> branch_refs;
    std::vector<PendingTry> pending_tries;
    size_t decl_line = 0;
  };

  ClassDef* current_class = nullptr;
  std::string current_class_descriptor;
  std::optional<MethodState> method;
  std::vector<std::string> seen_classes;

  auto finish_method = [&](MethodState& m) {
    // Labels may also name the end of the body (for try ranges).
    auto resolve = [&](const std::string& label, size_t at_line, bool allow_end) -> uint32_t {
      auto it = m.labels.find(label);
      if (it == m.labels.end()) {
        fail(ErrorKind::UndefinedLabel,
             "line " + std::to_string(at_line) + ": label '" + label + "' is not defined");
      }
      if (!allow_end && it->second >= m.code.insns.size()) {
        syntax_error(at_line, "label '" + label + "' points past the last instruction");
      }
      return it->second;
    };

    for (const PendingBranchRef& ref : m.branch_refs) {
      m.code.insns[ref.insn_index].target =
          static_cast<int32_t>(resolve(ref.label, ref.line_no, false));
    }

    // Group try directives by range; handlers keep directive order.
    for (const PendingTry& pending : m.pending_tries) {
      uint32_t start = resolve(pending.start_label, pending.line_no, false);
      uint32_t end = resolve(pending.end_label, pending.line_no, true);
      if (start >= end) syntax_error(pending.line_no, "empty try range");
      Handler handler;
      handler.catch_all = pending.catch_all;
      if (!pending.catch_all) {
        handler.type_index = interner.type(pending.type_descriptor);
      }
      handler.target = resolve(pending.handler_label, pending.line_no, false);

      TryBlock* block = nullptr;
      for (TryBlock& existing : m.code.tries) {
        if (existing.start == start && existing.end == end) {
          block = &existing;
          break;
        }
        bool disjoint = existing.end <= start || end <= existing.start;
        if (!disjoint) {
          syntax_error(pending.line_no, "overlapping try ranges");
        }
      }
      if (block == nullptr) {
        m.code.tries.push_back(TryBlock{start, end, {}});
        block = &m.code.tries.back();
      }
      if (!block->handlers.empty() && block->handlers.back().catch_all) {
        syntax_error(pending.line_no, "handler added after a catch-all");
      }
      block->handlers.push_back(handler);
    }

    bool is_static = (m.access_flags & kAccStatic) != 0;
    uint16_t ins = static_cast<uint16_t>(m.desc.params.size() + (is_static ? 0 : 1));
    bool has_body = !m.code.insns.empty();
    bool expects_body = (m.access_flags & (kAccNative | kAccAbstract)) == 0;
    if (has_body && !expects_body) {
      syntax_error(m.decl_line, "native/abstract method must not have a body");
    }
    if (expects_body && !has_body) {
      syntax_error(m.decl_line, "method body is empty");
    }
    if (has_body && !m.registers_seen) {
      syntax_error(m.decl_line, ".registers directive missing");
    }
    if (has_body && ins > m.code.registers_size) {
      syntax_error(m.decl_line, "parameters do not fit declared registers");
    }

    EncodedMethod encoded;
    encoded.method_index = interner.method(current_class_descriptor, m.desc.name,
                                           m.desc.return_type, m.desc.params);
    encoded.access_flags = m.access_flags;
    if (has_body) {
      m.code.ins_size = ins;
      uint16_t outs = 0;
      for (const Instruction& insn : m.code.insns) {
        if (insn.is_invoke()) outs = std::max<uint16_t>(outs, insn.reg_count);
      }
      m.code.outs_size = outs;
      encoded.code = std::move(m.code);
    }
    bool is_direct = is_static || (m.access_flags & kAccPrivate) != 0 ||
                     (m.access_flags & kAccConstructor) != 0;
    if (is_direct) {
      current_class->direct_methods.push_back(std::move(encoded));
    } else {
      current_class->virtual_methods.push_back(std::move(encoded));
    }
  };

  while (std::getline(stream, line)) {
    line_no++;
    std::vector<Token> tokens = tokenize(line, line_no);
    if (tokens.empty()) continue;
    const std::string& head = tokens[0].text;

    if (head == ".class") {
      if (method) syntax_error(line_no, ".class inside a method");
      if (tokens.size() < 2) syntax_error(line_no, ".class needs a descriptor");
      std::string descriptor = tokens.back().text;
      if (descriptor.empty() || descriptor[0] != 'L' || descriptor.back() != ';') {
        syntax_error(line_no, "class descriptor must look like Lpkg/Name;");
      }
      if (std::find(seen_classes.begin(), seen_classes.end(), descriptor) !=
          seen_classes.end()) {
        syntax_error(line_no, "duplicate class " + descriptor);
      }
      seen_classes.push_back(descriptor);
      ClassDef class_def;
      class_def.type_index = interner.type(descriptor);
      class_def.access_flags = parse_access_flags(tokens, 1, tokens.size() - 1, line_no);
      class_def.superclass_index = interner.type("Ljava/lang/Object;");
      dex.class_defs.push_back(std::move(class_def));
      current_class = &dex.class_defs.back();
      current_class_descriptor = descriptor;
      continue;
    }
    if (head == ".super") {
      if (!current_class || method) syntax_error(line_no, ".super outside a class");
      if (tokens.size() != 2) syntax_error(line_no, ".super needs a descriptor");
      current_class->superclass_index = interner.type(tokens[1].text);
      continue;
    }
    if (head == ".method") {
      if (!current_class) syntax_error(line_no, ".method outside a class");
      if (method) syntax_error(line_no, "nested .method");
      if (tokens.size() < 2) syntax_error(line_no, ".method needs a signature");
      MethodState m;
      m.decl_line = line_no;
      const std::string& sig = tokens.back().text;
      size_t paren = sig.find('(');
      size_t close = sig.find(')');
      if (paren == std::string::npos || close == std::string::npos || paren > close) {
        syntax_error(line_no, "bad method signature '" + sig + "'");
      }
      m.desc.name = sig.substr(0, paren);
      if (m.desc.name.empty()) syntax_error(line_no, "empty method name");
      m.desc.params = parse_type_list(sig.substr(paren + 1, close - paren - 1), line_no);
      m.desc.return_type = parse_single_type(sig.substr(close + 1), line_no, true);
      m.access_flags = parse_access_flags(tokens, 1, tokens.size() - 1, line_no);
      method = std::move(m);
      continue;
    }
    if (head == ".end") {
      if (tokens.size() != 2 || tokens[1].text != "method") {
        syntax_error(line_no, "expected '.end method'");
      }
      if (!method) syntax_error(line_no, ".end method without .method");
      finish_method(*method);
      method.reset();
      continue;
    }
    if (head == ".registers") {
      if (!method) syntax_error(line_no, ".registers outside a method");
      if (tokens.size() != 2) syntax_error(line_no, ".registers needs a count");
      int32_t count = parse_literal(tokens[1].text, line_no);
      if (count < 0 || count > 65535) syntax_error(line_no, "register count out of range");
      method->code.registers_size = static_cast<uint16_t>(count);
      method->registers_seen = true;
      continue;
    }
    if (head == ".try" || head == ".catchall") {
      if (!method) syntax_error(line_no, head + " outside a method");
      PendingTry pending;
      pending.line_no = line_no;
      if (head == ".try") {
        // .try start end catch Type handler
        if (tokens.size() != 6 || tokens[3].text != "catch") {
          syntax_error(line_no, ".try start_label end_label catch Type handler_label");
        }
        pending.start_label = tokens[1].text;
        pending.end_label = tokens[2].text;
        pending.type_descriptor = parse_single_type(tokens[4].text, line_no, false);
        pending.handler_label = tokens[5].text;
      } else {
        if (tokens.size() != 4) {
          syntax_error(line_no, ".catchall start_label end_label handler_label");
        }
        pending.catch_all = true;
        pending.start_label = tokens[1].text;
        pending.end_label = tokens[2].text;
        pending.handler_label = tokens[3].text;
      }
      method->pending_tries.push_back(pending);
      continue;
    }
    if (head.size() > 1 && head.back() == ':' && tokens.size() == 1 && !tokens[0].is_string) {
      if (!method) syntax_error(line_no, "label outside a method");
      std::string name = head.substr(0, head.size() - 1);
      if (!is_identifier(name)) syntax_error(line_no, "bad label name '" + name + "'");
      if (method->labels.count(name)) {
        fail(ErrorKind::DuplicateLabel,
             "line " + std::to_string(line_no) + ": label '" + name + "' already defined");
      }
      method->labels[name] = static_cast<uint32_t>(method->code.insns.size());
      continue;
    }

    // Anything else must be an instruction.
    if (!method) syntax_error(line_no, "instruction outside a method");
    if (head.front() == '.') syntax_error(line_no, "unknown directive " + head);
    std::optional<Opcode> op = opcode_from_mnemonic(head);
    if (!op) {
      fail(ErrorKind::UnknownOpcode,
           "line " + std::to_string(line_no) + ": '" + head + "' is not in the subset");
    }
    std::vector<Token> args(tokens.begin() + 1, tokens.end());
    Instruction insn;
    auto expect_args = [&](size_t n) {
      if (args.size() != n) {
        syntax_error(line_no, head + " expects " + std::to_string(n) + " operand(s)");
      }
    };
    switch (*op) {
      case Opcode::Nop:
        expect_args(0);
        insn = make_nop();
        break;
      case Opcode::ReturnVoid:
        expect_args(0);
        insn = make_return_void();
        break;
      case Opcode::Move:
      case Opcode::MoveObject:
        expect_args(2);
        insn = make_move(*op, parse_register(args[0].text, line_no),
                         parse_register(args[1].text, line_no));
        break;
      case Opcode::MoveResult:
      case Opcode::MoveResultObject:
        expect_args(1);
        insn = make_move_result(*op, parse_register(args[0].text, line_no));
        break;
      case Opcode::Return:
      case Opcode::ReturnObject:
      case Opcode::Throw:
        expect_args(1);
        insn = make_return(*op, parse_register(args[0].text, line_no));
        break;
      case Opcode::Const4: {
        expect_args(2);
        int32_t value = parse_literal(args[1].text, line_no);
        if (value < -8 || value > 7) syntax_error(line_no, "const/4 literal out of range");
        insn = make_const4(parse_register(args[0].text, line_no), value);
        break;
      }
      case Opcode::Const16: {
        expect_args(2);
        int32_t value = parse_literal(args[1].text, line_no);
        if (value < -32768 || value > 32767) {
          syntax_error(line_no, "const/16 literal out of range");
        }
        insn = make_const16(parse_register(args[0].text, line_no), value);
        break;
      }
      case Opcode::ConstString: {
        expect_args(2);
        if (!args[1].is_string) syntax_error(line_no, "const-string needs a quoted string");
        uint32_t index = interner.string(utf8_to_mutf8(args[1].text));
        insn = make_const_string(parse_register(args[0].text, line_no), index);
        break;
      }
      case Opcode::NewInstance: {
        expect_args(2);
        std::string descriptor = parse_single_type(args[1].text, line_no, false);
        insn = make_new_instance(parse_register(args[0].text, line_no),
                                 interner.type(descriptor));
        break;
      }
      case Opcode::Goto:
        expect_args(1);
        insn = make_goto(0);
        method->branch_refs.push_back({static_cast<uint32_t>(method->code.insns.size()),
                                       args[0].text, line_no});
        break;
      case Opcode::IfEqz:
        expect_args(2);
        insn = make_if_eqz(parse_register(args[0].text, line_no), 0);
        method->branch_refs.push_back({static_cast<uint32_t>(method->code.insns.size()),
                                       args[1].text, line_no});
        break;
      case Opcode::InvokeVirtual:
      case Opcode::InvokeDirect:
      case Opcode::InvokeStatic: {
        // invoke-kind {vA, vB, ...}, Lcls;->name(params)ret
        if (args.size() < 3 || args.front().text != "{" ) {
          syntax_error(line_no, head + " expects {args}, method");
        }
        size_t closing = 0;
        for (size_t i = 1; i < args.size(); i++) {
          if (args[i].text == "}") {
            closing = i;
            break;
          }
        }
        if (closing == 0 || closing + 2 != args.size()) {
          syntax_error(line_no, head + " expects {args}, method");
        }
        std::vector<uint16_t> regs;
        for (size_t i = 1; i < closing; i++) {
          regs.push_back(parse_register(args[i].text, line_no));
        }
        if (regs.size() > 5) syntax_error(line_no, "more than five invoke arguments");
        MethodDesc desc = parse_method_ref(args.back().text, line_no);
        uint32_t method_index = interner.method(desc.class_descriptor, desc.name,
                                                desc.return_type, desc.params);
        insn = make_invoke(*op, regs, method_index);
        break;
      }
      case Opcode::Opaque:
        break;  // unreachable: no mnemonic maps to Opaque
    }
    method->code.insns.push_back(insn);
  }

  if (method) syntax_error(line_no, "unterminated .method");
  if (!current_class && dex.class_defs.empty()) {
    syntax_error(line_no, "source defines no class");
  }

  normalize(dex);
  validate_indices(dex);
  return dex;
}

namespace {

std::string escape_string(const std::string& utf8) {
  std::string out;
  for (char c : utf8) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string disassemble(const DexFile& dex) {
  std::ostringstream out;
  bool first_class = true;
  for (const ClassDef& class_def : dex.class_defs) {
    if (!first_class) out << "\n";
    first_class = false;
    out << ".class " << access_flags_text(class_def.access_flags)
        << dex.type_descriptor(class_def.type_index) << "\n";
    if (class_def.superclass_index != kNoIndex) {
      out << ".super " << dex.type_descriptor(class_def.superclass_index) << "\n";
    }
    for (const auto* methods : {&class_def.direct_methods, &class_def.virtual_methods}) {
      for (const EncodedMethod& method : *methods) {
        const MethodRef& ref = dex.methods[method.method_index];
        out << "\n.method " << access_flags_text(method.access_flags)
            << dex.string_at(ref.name_index) << proto_descriptor(dex, ref.proto_index)
            << "\n";
        if (method.code) {
          const CodeItem& code = *method.code;
          if (code.has_opaque()) {
            fail(ErrorKind::OpaqueRegion,
                 "cannot disassemble " + method_signature(dex, method.method_index) +
                     ": body contains opaque units");
          }
          out << "    .registers " << code.registers_size << "\n";

          // Label every branch target, try bound and handler, L0.. in
          // address order.
          std::vector<uint32_t> label_points;
          for (const Instruction& insn : code.insns) {
            if (insn.is_branch()) label_points.push_back(static_cast<uint32_t>(insn.target));
          }
          for (const TryBlock& try_block : code.tries) {
            label_points.push_back(try_block.start);
            label_points.push_back(try_block.end);
            for (const Handler& handler : try_block.handlers) {
              label_points.push_back(handler.target);
            }
          }
          std::sort(label_points.begin(), label_points.end());
          label_points.erase(std::unique(label_points.begin(), label_points.end()),
                             label_points.end());
          std::map<uint32_t, std::string> labels;
          for (size_t i = 0; i < label_points.size(); i++) {
            labels[label_points[i]] = "L" + std::to_string(i);
          }

          for (uint32_t i = 0; i <= code.insns.size(); i++) {
            if (labels.count(i)) out << labels[i] << ":\n";
            if (i == code.insns.size()) break;
            const Instruction& insn = code.insns[i];
            out << "    " << opcode_info(insn.op).mnemonic;
            switch (insn.op) {
              case Opcode::Nop:
              case Opcode::ReturnVoid:
                break;
              case Opcode::Move:
              case Opcode::MoveObject:
                out << " v" << insn.regs[0] << ", v" << insn.regs[1];
                break;
              case Opcode::MoveResult:
              case Opcode::MoveResultObject:
              case Opcode::Return:
              case Opcode::ReturnObject:
              case Opcode::Throw:
                out << " v" << insn.regs[0];
                break;
              case Opcode::Const4:
              case Opcode::Const16:
                out << " v" << insn.regs[0] << ", " << insn.literal;
                break;
              case Opcode::ConstString:
                out << " v" << insn.regs[0] << ", \""
                    << escape_string(mutf8_to_utf8(dex.string_at(insn.pool_index))) << "\"";
                break;
              case Opcode::NewInstance:
                out << " v" << insn.regs[0] << ", " << dex.type_descriptor(insn.pool_index);
                break;
              case Opcode::Goto:
                out << " " << labels[insn.target];
                break;
              case Opcode::IfEqz:
                out << " v" << insn.regs[0] << ", " << labels[insn.target];
                break;
              case Opcode::InvokeVirtual:
              case Opcode::InvokeDirect:
              case Opcode::InvokeStatic: {
                out << " {";
                for (uint8_t a = 0; a < insn.reg_count; a++) {
                  if (a) out << ", ";
                  out << "v" << insn.regs[a];
                }
                out << "}, " << method_signature(dex, insn.pool_index);
                break;
              }
              case Opcode::Opaque:
                break;  // guarded above
            }
            out << "\n";
          }
          for (const TryBlock& try_block : code.tries) {
            for (const Handler& handler : try_block.handlers) {
              if (handler.catch_all) {
                out << "    .catchall " << labels[try_block.start] << " "
                    << labels[try_block.end] << " " << labels[handler.target] << "\n";
              } else {
                out << "    .try " << labels[try_block.start] << " " << labels[try_block.end]
                    << " catch " << dex.type_descriptor(handler.type_index) << " "
                    << labels[handler.target] << "\n";
              }
            }
          }
        }
        out << ".end method\n";
      }
    }
  }
  return out.str();
}

}  // namespace dexweaver
