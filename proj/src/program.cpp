#include "rnn/program.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace rnn {

int ExeBlockClass::param_index(const std::string& n) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == n) return int(i);
  return -1;
}

int ExecutionGraph::class_index(const std::string& n) const {
  for (size_t i = 0; i < classes.size(); ++i)
    if (classes[i].name == n) return int(i);
  return -1;
}

int ExecutionGraph::instance_index(const std::string& n) const {
  for (size_t i = 0; i < instances.size(); ++i)
    if (instances[i].name == n) return int(i);
  return -1;
}

int ExecutionGraph::region_index(const std::string& n) const {
  for (size_t i = 0; i < regions.size(); ++i)
    if (regions[i].name == n) return int(i);
  return -1;
}

int ExecutionGraph::task_index(int id) const {
  for (size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i].id == id) return int(i);
  return -1;
}

std::vector<int> ExecutionGraph::successors_of(int inst) const {
  std::vector<int> out;
  for (const auto& e : edges)
    if (e.from == inst) out.push_back(e.to);
  return out;
}

int ExecutionGraph::predecessor_count(int inst) const {
  int n = 0;
  for (const auto& e : edges)
    if (e.to == inst) ++n;
  return n;
}

namespace {

uint32_t resolve_operand(const ExecutionGraph& g, const ExeBlockInstance& in,
                         const ExeBlockClass& cls, const TemplateOperand& t,
                         ParamType expected, const char* what) {
  if (t.param < 0) return t.value;
  const ClassParam& p = cls.params[size_t(t.param)];
  if (p.type != expected) {
    throw TypeMismatch("instance '" + in.name + "': parameter '" + p.name +
                       "' used as " + what + " but declared with a different type");
  }
  if (size_t(t.param) >= in.bindings.size())
    throw UnboundParameter("instance '" + in.name + "': parameter '" + p.name +
                           "' has no binding");
  return in.bindings[size_t(t.param)] + t.value;
}

}  // namespace

BoundBody instantiate(const ExecutionGraph& g, int inst_idx) {
  const ExeBlockInstance& in = g.instances.at(size_t(inst_idx));
  const ExeBlockClass& cls = g.classes.at(size_t(in.class_idx));
  if (in.bindings.size() != cls.params.size())
    throw UnboundParameter("instance '" + in.name + "': expected " +
                           std::to_string(cls.params.size()) + " bindings, got " +
                           std::to_string(in.bindings.size()));
  BoundBody body;
  for (int s = 0; s < kNumStages; ++s) {
    for (const auto& t : cls.body[s]) {
      BoundInst b;
      b.op = t.op;
      b.lookup = t.lookup;
      b.weight_tag = t.weight_tag;
      switch (stage_of(t.op)) {
        case Stage::LD:
        case Stage::ST:
          b.opm0 = resolve_operand(g, in, cls, t.a, ParamType::Opm, "an OPM address");
          b.dram_off = resolve_operand(g, in, cls, t.b, ParamType::Dram, "a DRAM offset");
          break;
        case Stage::CAL:
          b.opm0 = resolve_operand(g, in, cls, t.a, ParamType::Opm, "an OPM address");
          b.opm1 = resolve_operand(g, in, cls, t.b, ParamType::Opm, "an OPM address");
          b.opm2 = resolve_operand(g, in, cls, t.c, ParamType::Opm, "an OPM address");
          break;
        case Stage::FLOW:
          b.opm0 = resolve_operand(g, in, cls, t.a, ParamType::Opm, "an OPM address");
          b.opm1 = resolve_operand(g, in, cls, t.b, ParamType::Opm, "an OPM address");
          b.peer_lpe = resolve_operand(g, in, cls, t.c, ParamType::Pe, "a PE id");
          break;
      }
      body.stage[s].push_back(b);
    }
  }
  return body;
}

std::vector<Diagnostic> validate_graph(const ExecutionGraph& g) {
  std::vector<Diagnostic> diags;
  auto add = [&](const std::string& kind, const std::string& msg) {
    diags.push_back({kind, msg});
  };

  std::set<uint32_t> lpes;
  for (const auto& in : g.instances) lpes.insert(in.lpe);

  // successor limit and task-locality of edges
  std::vector<int> outdeg(g.instances.size(), 0);
  for (const auto& e : g.edges) {
    if (e.from < 0 || size_t(e.from) >= g.instances.size() || e.to < 0 ||
        size_t(e.to) >= g.instances.size()) {
      add("BadEdge", "edge references unknown instance");
      continue;
    }
    ++outdeg[size_t(e.from)];
    if (g.instances[size_t(e.from)].task_id != g.instances[size_t(e.to)].task_id)
      add("CrossTaskEdge", "edge " + g.instances[size_t(e.from)].name + " -> " +
                               g.instances[size_t(e.to)].name +
                               " crosses task boundaries");
  }
  for (size_t i = 0; i < g.instances.size(); ++i) {
    if (outdeg[i] > 3)
      add("TooManySuccessors",
          "instance '" + g.instances[i].name + "' has " + std::to_string(outdeg[i]) +
              " successors (max 3)");
  }

  // per-task cycle check (DFS)
  {
    std::vector<std::vector<int>> adj(g.instances.size());
    for (const auto& e : g.edges)
      if (e.from >= 0 && e.to >= 0 && size_t(e.from) < g.instances.size() &&
          size_t(e.to) < g.instances.size() &&
          g.instances[size_t(e.from)].task_id == g.instances[size_t(e.to)].task_id)
        adj[size_t(e.from)].push_back(e.to);
    std::vector<int> state(g.instances.size(), 0);
    std::function<bool(int)> dfs = [&](int v) {
      state[size_t(v)] = 1;
      for (int w : adj[size_t(v)]) {
        if (state[size_t(w)] == 1) return true;
        if (state[size_t(w)] == 0 && dfs(w)) return true;
      }
      state[size_t(v)] = 2;
      return false;
    };
    for (size_t i = 0; i < g.instances.size(); ++i)
      if (state[i] == 0 && dfs(int(i))) {
        add("CycleDetected", "dataflow cycle within task " +
                                 std::to_string(g.instances[i].task_id));
        break;
      }
  }

  // COPY destinations must name an existing logical PE, and every instance
  // must bind all of its class parameters with type-correct values.
  for (size_t i = 0; i < g.instances.size(); ++i) {
    const auto& in = g.instances[i];
    if (in.class_idx < 0 || size_t(in.class_idx) >= g.classes.size()) {
      add("UnknownClass", "instance '" + in.name + "' has no class");
      continue;
    }
    try {
      BoundBody b = instantiate(g, int(i));
      for (const auto& bi : b.stage[int(Stage::FLOW)]) {
        if (!lpes.count(bi.peer_lpe))
          add("UnknownCopyTarget", "instance '" + in.name +
                                       "' copies to logical PE " +
                                       std::to_string(bi.peer_lpe) +
                                       " which hosts no instance");
      }
    } catch (const std::exception& e) {
      add("BindError", e.what());
    }
    if (g.task_index(in.task_id) < 0)
      add("UnknownTask", "instance '" + in.name + "' references task " +
                             std::to_string(in.task_id));
  }

  for (const auto& t : g.tasks) {
    if (t.ld_region < 0 || size_t(t.ld_region) >= g.regions.size() ||
        t.st_region < 0 || size_t(t.st_region) >= g.regions.size())
      add("UnknownRegion", "task " + std::to_string(t.id) +
                               " has unresolvable ld/st region");
    if (t.iters < 1)
      add("BadIterationCount", "task " + std::to_string(t.id) + " iters < 1");
  }
  return diags;
}

StaticCounts graph_static_counts(const ExecutionGraph& g) {
  StaticCounts c;
  c.blocks = g.instances.size();
  std::set<std::pair<uint32_t, uint32_t>> entries;  // (lpe, logical addr)
  for (size_t i = 0; i < g.instances.size(); ++i) {
    const auto& in = g.instances[i];
    BoundBody b = instantiate(g, int(i));
    c.ld += b.stage[0].size();
    c.cal += b.stage[1].size();
    c.copy += b.stage[2].size();
    c.st += b.stage[3].size();
    for (const auto& bi : b.stage[0]) entries.insert({in.lpe, bi.opm0});
    for (const auto& bi : b.stage[1]) {
      entries.insert({in.lpe, bi.opm0});
      if (bi.op != Opcode::PREREAD0) entries.insert({in.lpe, bi.opm1});
      if (bi.op != Opcode::PREREAD0 && bi.op != Opcode::PREREAD1)
        entries.insert({in.lpe, bi.opm2});
    }
    for (const auto& bi : b.stage[2]) {
      entries.insert({in.lpe, bi.opm0});
      entries.insert({bi.peer_lpe, bi.opm1});
    }
    for (const auto& bi : b.stage[3]) entries.insert({in.lpe, bi.opm0});
  }
  c.opm_entries = entries.size();
  return c;
}

// ------------------------- text format -------------------------

namespace {

struct Tokenizer {
  std::vector<std::string> toks;
  explicit Tokenizer(const std::string& line) {
    std::istringstream is(line);
    std::string t;
    while (is >> t) toks.push_back(t);
  }
};

std::string strip_comment(const std::string& line) {
  size_t h = line.find('#');
  return h == std::string::npos ? line : line.substr(0, h);
}

uint64_t parse_num(const std::string& s, const char* ctx) {
  try {
    size_t pos = 0;
    uint64_t v;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
      v = std::stoull(s.substr(2), &pos, 16), pos += 2;
    else
      v = std::stoull(s, &pos, 10);
    if (pos != s.size()) throw std::runtime_error("");
    return v;
  } catch (...) {
    throw GraphParseError(std::string("bad number '") + s + "' in " + ctx);
  }
}

// "$name", "$name+123", or a literal
TemplateOperand parse_operand(const std::string& tok, const ExeBlockClass& cls) {
  TemplateOperand t;
  std::string s = tok;
  if (!s.empty() && s.back() == ',') s.pop_back();
  if (!s.empty() && s[0] == '$') {
    size_t plus = s.find('+');
    std::string pname = plus == std::string::npos ? s.substr(1) : s.substr(1, plus - 1);
    t.param = cls.param_index(pname);
    if (t.param < 0)
      throw GraphParseError("undeclared parameter '$" + pname + "' in class " +
                            cls.name);
    if (plus != std::string::npos)
      t.value = uint32_t(parse_num(s.substr(plus + 1), "operand offset"));
  } else {
    t.value = uint32_t(parse_num(s, "operand"));
  }
  return t;
}

ParamType parse_param_type(const std::string& s) {
  if (s == "opm") return ParamType::Opm;
  if (s == "dram") return ParamType::Dram;
  if (s == "pe") return ParamType::Pe;
  throw GraphParseError("unknown parameter type '" + s + "'");
}

const char* param_type_name(ParamType t) {
  switch (t) {
    case ParamType::Opm: return "opm";
    case ParamType::Dram: return "dram";
    case ParamType::Pe: return "pe";
  }
  return "?";
}

}  // namespace

ExecutionGraph parse_graph(const std::string& text, const std::string& include_dir) {
  ExecutionGraph g;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;

  ExeBlockClass* cur_class = nullptr;
  int cur_stage = -1;
  ExeBlockInstance* cur_inst = nullptr;

  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) throw GraphParseError("line " + std::to_string(lineno) + ": " + msg);
  };

  std::function<void(std::istream&)> run;  // forward decl for include

  auto handle_line = [&](const std::string& rawline) {
    std::string line = strip_comment(rawline);
    Tokenizer tz(line);
    auto& t = tz.toks;
    if (t.empty()) return;

    if (cur_class) {
      if (t[0] == "}") {
        cur_class = nullptr;
        cur_stage = -1;
        return;
      }
      if (t[0] == "param") {
        need(t.size() == 3, "param NAME TYPE");
        cur_class->params.push_back({t[1], parse_param_type(t[2])});
        return;
      }
      if (t[0] == "ld:") { cur_stage = 0; return; }
      if (t[0] == "cal:") { cur_stage = 1; return; }
      if (t[0] == "flow:") { cur_stage = 2; return; }
      if (t[0] == "st:") { cur_stage = 3; return; }
      // instruction line
      need(cur_stage >= 0, "instruction before stage label in class " + cur_class->name);
      Opcode op;
      need(opcode_from_name(t[0], op), "unknown opcode '" + t[0] + "'");
      need(int(stage_of(op)) == cur_stage,
           std::string(t[0]) + " does not belong to the current stage section");
      TemplateInst ti;
      ti.op = op;
      size_t i = 1;
      auto next_tok = [&]() -> std::string {
        need(i < t.size(), "missing operand");
        return t[i++];
      };
      // operands: LD/ST take 2, CAL arithmetic takes 3, PREREAD takes 1, COPY takes 3
      switch (op) {
        case Opcode::LD:
        case Opcode::ST:
          ti.a = parse_operand(next_tok(), *cur_class);
          ti.b = parse_operand(next_tok(), *cur_class);
          break;
        case Opcode::PREREAD0:
          ti.a = parse_operand(next_tok(), *cur_class);
          break;
        case Opcode::PREREAD1:
          ti.b = parse_operand(next_tok(), *cur_class);
          break;
        case Opcode::COPY:
          ti.a = parse_operand(next_tok(), *cur_class);
          ti.b = parse_operand(next_tok(), *cur_class);
          ti.c = parse_operand(next_tok(), *cur_class);
          break;
        default:  // 3-operand CAL
          ti.a = parse_operand(next_tok(), *cur_class);
          ti.b = parse_operand(next_tok(), *cur_class);
          ti.c = parse_operand(next_tok(), *cur_class);
          break;
      }
      while (i < t.size()) {
        std::string k = t[i++];
        if (k == "!w") {
          ti.weight_tag = int64_t(parse_num(next_tok(), "weight tag"));
        } else if (k.rfind("lookup=", 0) == 0) {
          need(op == Opcode::ST, "lookup= only on ST");
          ti.lookup = uint8_t(parse_num(k.substr(7), "lookup"));
        } else {
          need(false, "unexpected token '" + k + "'");
        }
      }
      cur_class->body[cur_stage].push_back(ti);
      return;
    }

    if (cur_inst) {
      if (t[0] == "}") {
        cur_inst = nullptr;
        return;
      }
      need(t[0] == "bind" && t.size() == 3, "bind PARAM VALUE");
      const ExeBlockClass& cls = g.classes[size_t(cur_inst->class_idx)];
      int pi = cls.param_index(t[1]);
      need(pi >= 0, "unknown parameter '" + t[1] + "'");
      if (cur_inst->bindings.size() < cls.params.size())
        cur_inst->bindings.resize(cls.params.size(), UINT32_MAX);
      cur_inst->bindings[size_t(pi)] = uint32_t(parse_num(t[2], "binding"));
      return;
    }

    if (t[0] == "simd") {
      need(t.size() == 2, "simd N");
      g.simd = int(parse_num(t[1], "simd"));
    } else if (t[0] == "region") {
      need(t.size() == 3, "region NAME SIZE");
      g.regions.push_back({t[1], parse_num(t[2], "region size")});
    } else if (t[0] == "class") {
      need(t.size() == 3 && t[2] == "{", "class NAME {");
      g.classes.push_back({});
      g.classes.back().name = t[1];
      cur_class = &g.classes.back();
      cur_stage = -1;
    } else if (t[0] == "instance") {
      // instance NAME class C lpe N task N [priority N] [sparse N] {
      need(t.size() >= 8, "instance NAME class C lpe N task N ... {");
      ExeBlockInstance in;
      in.name = t[1];
      bool priority_set = false;
      size_t i = 2;
      bool brace = false;
      while (i < t.size()) {
        std::string k = t[i];
        if (k == "{") { brace = true; break; }
        need(i + 1 < t.size(), "missing value after " + k);
        std::string v = t[i + 1];
        i += 2;
        if (k == "class") {
          in.class_idx = g.class_index(v);
          need(in.class_idx >= 0, "unknown class '" + v + "'");
        } else if (k == "lpe") {
          in.lpe = uint32_t(parse_num(v, "lpe"));
        } else if (k == "task") {
          in.task_id = int(parse_num(v, "task"));
        } else if (k == "priority") {
          in.priority = uint32_t(parse_num(v, "priority"));
          priority_set = true;
        } else if (k == "sparse") {
          in.sparse = parse_num(v, "sparse") != 0;
        } else {
          need(false, "unknown instance attribute '" + k + "'");
        }
      }
      need(brace, "expected '{' on instance line");
      need(in.class_idx >= 0, "instance without class");
      if (!priority_set) in.priority = uint32_t(g.instances.size());
      g.instances.push_back(in);
      cur_inst = &g.instances.back();
      cur_inst->bindings.assign(g.classes[size_t(cur_inst->class_idx)].params.size(),
                                UINT32_MAX);
    } else if (t[0] == "edge") {
      need(t.size() == 4 && t[2] == "->", "edge A -> B");
      int a = g.instance_index(t[1]);
      int b = g.instance_index(t[3]);
      need(a >= 0 && b >= 0, "edge references unknown instance");
      g.edges.push_back({a, b});
    } else if (t[0] == "task") {
      // task ID iters N ld_region R st_region R
      need(t.size() == 8, "task ID iters N ld_region R st_region R");
      TaskDef td;
      td.id = int(parse_num(t[1], "task id"));
      need(t[2] == "iters", "expected iters");
      td.iters = int(parse_num(t[3], "iters"));
      need(t[4] == "ld_region" && t[6] == "st_region", "bad task line");
      td.ld_region = g.region_index(t[5]);
      td.st_region = g.region_index(t[7]);
      need(td.ld_region >= 0 && td.st_region >= 0, "task references unknown region");
      td.prestage.resize(size_t(td.iters));
      td.poststage.resize(size_t(td.iters));
      g.tasks.push_back(td);
    } else if (t[0] == "prestage" || t[0] == "poststage") {
      // prestage TASK ITER SRC OFF DST OFF LEN
      need(t.size() == 8, "prestage TASK ITER SRCREGION OFF DSTREGION OFF LEN");
      int ti = g.task_index(int(parse_num(t[1], "task id")));
      need(ti >= 0, "staging references unknown task");
      TaskDef& td = g.tasks[size_t(ti)];
      size_t iter = size_t(parse_num(t[2], "iter"));
      need(iter < size_t(td.iters), "staging iter out of range");
      StagingCopy sc;
      sc.src_region = g.region_index(t[3]);
      sc.src_off = parse_num(t[4], "src off");
      sc.dst_region = g.region_index(t[5]);
      sc.dst_off = parse_num(t[6], "dst off");
      sc.len = parse_num(t[7], "len");
      need(sc.src_region >= 0 && sc.dst_region >= 0, "staging references unknown region");
      (t[0] == "prestage" ? td.prestage : td.poststage)[iter].push_back(sc);
    } else if (t[0] == "include") {
      need(t.size() == 2, "include \"file\"");
      std::string path = t[1];
      if (path.size() >= 2 && path.front() == '"' && path.back() == '"')
        path = path.substr(1, path.size() - 2);
      if (!include_dir.empty()) path = include_dir + "/" + path;
      std::ifstream f(path);
      need(f.good(), "cannot open include file '" + path + "'");
      std::string l2;
      while (std::getline(f, l2)) {
        ++lineno;
        handle_line(l2);
      }
    } else {
      need(false, "unknown directive '" + t[0] + "'");
    }
  };

  while (std::getline(in, raw)) {
    ++lineno;
    handle_line(raw);
  }
  need(cur_class == nullptr, "unterminated class block");
  need(cur_inst == nullptr, "unterminated instance block");

  for (const auto& inst : g.instances) {
    const auto& cls = g.classes[size_t(inst.class_idx)];
    for (size_t p = 0; p < cls.params.size(); ++p)
      if (inst.bindings[p] == UINT32_MAX)
        throw UnboundParameter("instance '" + inst.name + "': parameter '" +
                               cls.params[p].name + "' never bound");
  }
  return g;
}

ExecutionGraph load_graph_file(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw GraphParseError("cannot open graph file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  std::string dir;
  size_t slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash);
  return parse_graph(ss.str(), dir);
}

namespace {

std::string operand_text(const TemplateOperand& t, const ExeBlockClass& cls) {
  if (t.param < 0) return std::to_string(t.value);
  std::string s = "$" + cls.params[size_t(t.param)].name;
  if (t.value != 0) s += "+" + std::to_string(t.value);
  return s;
}

}  // namespace

std::string serialize_graph(const ExecutionGraph& g) {
  std::ostringstream os;
  os << "simd " << g.simd << "\n";
  for (const auto& r : g.regions) os << "region " << r.name << " " << r.size << "\n";
  for (const auto& c : g.classes) {
    os << "class " << c.name << " {\n";
    for (const auto& p : c.params)
      os << "  param " << p.name << " " << param_type_name(p.type) << "\n";
    static const char* labels[] = {"ld:", "cal:", "flow:", "st:"};
    for (int s = 0; s < kNumStages; ++s) {
      if (c.body[s].empty()) continue;
      os << "  " << labels[s] << "\n";
      for (const auto& ti : c.body[s]) {
        os << "  " << opcode_name(ti.op);
        switch (ti.op) {
          case Opcode::LD:
          case Opcode::ST:
            os << " " << operand_text(ti.a, c) << " " << operand_text(ti.b, c);
            break;
          case Opcode::PREREAD0:
            os << " " << operand_text(ti.a, c);
            break;
          case Opcode::PREREAD1:
            os << " " << operand_text(ti.b, c);
            break;
          default:
            os << " " << operand_text(ti.a, c) << " " << operand_text(ti.b, c) << " "
               << operand_text(ti.c, c);
            break;
        }
        if (ti.lookup) os << " lookup=" << int(ti.lookup);
        if (ti.weight_tag >= 0) os << " !w " << ti.weight_tag;
        os << "\n";
      }
    }
    os << "}\n";
  }
  for (const auto& in : g.instances) {
    os << "instance " << in.name << " class " << g.classes[size_t(in.class_idx)].name
       << " lpe " << in.lpe << " task " << in.task_id << " priority " << in.priority
       << " sparse " << (in.sparse ? 1 : 0) << " {\n";
    const auto& cls = g.classes[size_t(in.class_idx)];
    for (size_t p = 0; p < cls.params.size(); ++p)
      os << "  bind " << cls.params[p].name << " " << in.bindings[p] << "\n";
    os << "}\n";
  }
  for (const auto& e : g.edges)
    os << "edge " << g.instances[size_t(e.from)].name << " -> "
       << g.instances[size_t(e.to)].name << "\n";
  for (const auto& td : g.tasks) {
    os << "task " << td.id << " iters " << td.iters << " ld_region "
       << g.regions[size_t(td.ld_region)].name << " st_region "
       << g.regions[size_t(td.st_region)].name << "\n";
    for (int it = 0; it < td.iters; ++it) {
      for (const auto& sc : td.prestage[size_t(it)])
        os << "prestage " << td.id << " " << it << " "
           << g.regions[size_t(sc.src_region)].name << " " << sc.src_off << " "
           << g.regions[size_t(sc.dst_region)].name << " " << sc.dst_off << " "
           << sc.len << "\n";
      for (const auto& sc : td.poststage[size_t(it)])
        os << "poststage " << td.id << " " << it << " "
           << g.regions[size_t(sc.src_region)].name << " " << sc.src_off << " "
           << g.regions[size_t(sc.dst_region)].name << " " << sc.dst_off << " "
           << sc.len << "\n";
    }
  }
  return os.str();
}

}  // namespace rnn
