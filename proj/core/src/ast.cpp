#include "multicfv/ast.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "detail.hpp"

namespace multicfv::ast {
namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, kRoleCount> kRoleNames = {
    "StateVariableDeclaration",  "EmitStatement",  "contract",
    "Conditional",               "FunctionCall",   "NumberLiteral",
    "ThrowStatement",            "ExpressionStatement", "MemberAccess",
    "ReturnStatement",           "IndexAccess",    "ForStatement",
    "StringLiteral",             "interface",      "TupleExpression",
    "BooleanLiteral",            "IfStatement",    "ModifierDefinition",
    "StructDefinition",          "EventDefinition", "InlineAssemblyStatement",
    "WhileStatement",            "library",        "Identifier",
    "UnaryOperation",            "VariableDeclarationStatement", "PragmaDirective",
    "BinaryOperation",           "ElementaryTypeNameExpression", "EnumDefinition",
    "ContractDefinition",        "FunctionDefinition", "UsingForDeclaration",
    "block",                     "Other",
};

// Spellings used by other AST emitters for the same roles.
const std::unordered_map<std::string_view, Role>& type_aliases() {
  static const std::unordered_map<std::string_view, Role> m = {
      {"Block", Role::Block},
      {"Return", Role::ReturnStatement},
      {"InlineAssembly", Role::InlineAssemblyStatement},
      {"Throw", Role::ThrowStatement},
  };
  return m;
}

Role type_role(std::string_view type, std::string_view kind) {
  if (type == "Literal") {
    if (kind == "number") return Role::NumberLiteral;
    if (kind == "string") return Role::StringLiteral;
    if (kind == "bool") return Role::BooleanLiteral;
  }
  // Kind-only names never identify a node type on their own.
  if (auto r = role_from_name(type); r && *r != Role::Contract && *r != Role::Interface && *r != Role::Library)
    return *r;
  if (auto it = type_aliases().find(type); it != type_aliases().end()) return it->second;
  return Role::Other;
}

const json* type_field(const json& obj) {
  if (!obj.is_object()) return nullptr;
  if (auto it = obj.find("nodeType"); it != obj.end()) return &*it;
  if (auto it = obj.find("type"); it != obj.end()) return &*it;
  return nullptr;
}

bool is_reserved_key(const std::string& key) {
  return key == "nodeType" || key == "type" || key == "kind" || key == "contractKind";
}

class Walker {
 public:
  Walker(AstTree& tree, std::string label) : tree_(tree), label_(std::move(label)) {}

  void collect(const json& value, const std::string& pointer, std::vector<AstNode>& out) {
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) collect(value[i], pointer + "/" + std::to_string(i), out);
    } else if (value.is_object()) {
      if (type_field(value)) {
        out.push_back(make_node(value, pointer));
      } else {
        for (auto it = value.begin(); it != value.end(); ++it) collect(it.value(), pointer + "/" + it.key(), out);
      }
    }
  }

  AstNode make_node(const json& obj, const std::string& pointer) {
    const json& t = *type_field(obj);
    if (!t.is_string()) fail(pointer, "node type is not a string");
    AstNode node;
    node.node_type = t.get<std::string>();
    for (const char* key : {"kind", "contractKind"}) {
      if (auto it = obj.find(key); it != obj.end() && it->is_string()) {
        node.kind = it->get<std::string>();
        break;
      }
    }
    node.type_role = type_role(node.node_type, node.kind);
    // solc spells state variables as VariableDeclaration{stateVariable: true}.
    if (node.node_type == "VariableDeclaration") {
      if (auto it = obj.find("stateVariable"); it != obj.end() && it->is_boolean() && it->get<bool>())
        node.type_role = Role::StateVariableDeclaration;
    }
    if (node.type_role == Role::Other) ++tree_.unknown_types[node.node_type];

    if (auto it = obj.find("children"); it != obj.end() && !it->is_array() && !it->is_null())
      fail(pointer + "/children", "children is not an array");

    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (is_reserved_key(it.key())) continue;
      collect(it.value(), pointer + "/" + it.key(), node.children);
    }

    if (node.type_role == Role::FunctionDefinition) {
      node.has_input_params = has_parameters(obj, "parameters");
      node.has_output_params = has_parameters(obj, "returnParameters");
      node.has_variables = contains(node, Role::VariableDeclarationStatement);
    }
    return node;
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw Error(ErrorKind::MalformedAst, label_ + ": " + what + " at " + (pointer.empty() ? "/" : pointer));
  }

 private:
  static std::size_t count_declarations(const json& v) {
    std::size_t n = 0;
    if (v.is_array()) {
      for (const auto& e : v) n += count_declarations(e);
    } else if (v.is_object()) {
      const json* t = type_field(v);
      if (t && t->is_string() && *t != "ParameterList") ++n;
      for (auto it = v.begin(); it != v.end(); ++it)
        if (!is_reserved_key(it.key())) n += count_declarations(it.value());
    }
    return n;
  }

  static bool has_parameters(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it != obj.end() && count_declarations(*it) > 0;
  }

  static bool contains(const AstNode& node, Role role) {
    for (const auto& c : node.children)
      if (c.type_role == role || contains(c, role)) return true;
    return false;
  }

  AstTree& tree_;
  std::string label_;
};

std::size_t count_nodes(const AstNode& n) {
  std::size_t total = 1;
  for (const auto& c : n.children) total += count_nodes(c);
  return total;
}

}  // namespace

std::string_view role_name(Role role) { return kRoleNames[static_cast<std::size_t>(role)]; }

std::optional<Role> role_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNamedRoleCount; ++i)
    if (kRoleNames[i] == name) return static_cast<Role>(i);
  return std::nullopt;
}

Role AstNode::role() const {
  if (kind == "contract") return Role::Contract;
  if (kind == "interface") return Role::Interface;
  if (kind == "library") return Role::Library;
  return type_role;
}

std::size_t AstTree::node_count() const {
  std::size_t n = 0;
  for (const auto& r : roots) n += count_nodes(r);
  return n;
}

std::size_t AstTree::unknown_count() const {
  std::size_t n = 0;
  for (const auto& [_, c] : unknown_types) n += c;
  return n;
}

AstTree parse_ast(std::string_view json_text, std::string_view source_label) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedAst, std::string(source_label) + ": invalid JSON at byte " + std::to_string(e.byte));
  }
  AstTree tree;
  Walker walker(tree, std::string(source_label));
  if (!doc.is_object() && !doc.is_array()) walker.fail("", "document is neither an object nor an array");

  std::vector<AstNode> top;
  walker.collect(doc, "", top);
  if (doc.is_object() && top.empty()) walker.fail("", "no AST nodes found");

  for (auto& n : top) {
    if (n.node_type == "SourceUnit") {
      // The wrapper itself was counted as unknown; it is not a node role.
      if (auto it = tree.unknown_types.find("SourceUnit"); it != tree.unknown_types.end() && --it->second == 0)
        tree.unknown_types.erase(it);
      for (auto& c : n.children) tree.roots.push_back(std::move(c));
    } else {
      tree.roots.push_back(std::move(n));
    }
  }
  return tree;
}

AstTree parse_ast_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ast(ss.str(), path.string());
}

std::vector<RolePair> default_role_pairs() {
  using R = Role;
  return {
      {R::Contract, R::FunctionDefinition},     {R::Contract, R::StateVariableDeclaration},
      {R::Contract, R::ModifierDefinition},     {R::Contract, R::EventDefinition},
      {R::Contract, R::UsingForDeclaration},    {R::Library, R::FunctionDefinition},
      {R::Interface, R::FunctionDefinition},    {R::FunctionDefinition, R::Block},
      {R::FunctionDefinition, R::ExpressionStatement}, {R::Block, R::ExpressionStatement},
      {R::Block, R::IfStatement},               {R::Block, R::ReturnStatement},
      {R::Block, R::VariableDeclarationStatement}, {R::Block, R::EmitStatement},
      {R::ExpressionStatement, R::FunctionCall}, {R::ExpressionStatement, R::BinaryOperation},
      {R::IfStatement, R::FunctionCall},        {R::IfStatement, R::BinaryOperation},
      {R::FunctionCall, R::MemberAccess},       {R::BinaryOperation, R::IndexAccess},
  };
}

std::vector<RolePair> parse_role_pairs(std::string_view text) {
  std::vector<RolePair> pairs;
  std::size_t pos = 0;
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  };
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const std::string_view item = trim(text.substr(pos, comma - pos));
    pos = comma + 1;
    if (item.empty()) continue;
    const std::size_t gt = item.find('>');
    if (gt == std::string_view::npos) throw Error(ErrorKind::ConfigError, "role pair without '>': " + std::string(item));
    // Role names first, then node-type spellings such as "Block".
    auto lookup = [](std::string_view name) -> std::optional<Role> {
      if (auto r = role_from_name(name)) return r;
      if (Role r = type_role(name, {}); r != Role::Other) return r;
      return std::nullopt;
    };
    auto parent = lookup(trim(item.substr(0, gt)));
    auto child = lookup(trim(item.substr(gt + 1)));
    if (!parent || !child) throw Error(ErrorKind::ConfigError, "unknown role in pair: " + std::string(item));
    pairs.push_back({*parent, *child});
  }
  return pairs;
}

std::string format_role_pairs(std::span<const RolePair> pairs) {
  std::string s;
  for (const auto& p : pairs) {
    if (!s.empty()) s += ',';
    s += role_name(p.parent);
    s += '>';
    s += role_name(p.child);
  }
  return s;
}

std::size_t child_bucket(std::size_t n) {
  if (n <= 2) return n;
  if (n <= 5) return 3;
  return 4;
}

Vector AstStatistics::flatten() const {
  Vector v(static_cast<Eigen::Index>(raw_feature_width(pair_counts.size())));
  Eigen::Index i = 0;
  for (double c : role_counts) v[i++] = c;
  for (double c : pair_counts) v[i++] = c;
  for (double c : child_histogram) v[i++] = c;
  v[i++] = functions_with_variables;
  v[i++] = functions_with_inputs;
  v[i++] = functions_with_outputs;
  return v;
}

std::size_t raw_feature_width(std::size_t pair_count) { return kRoleCount + pair_count + kChildBuckets + 3; }

AstStatistics ast_statistics(const AstTree& tree, std::span<const RolePair> pairs) {
  AstStatistics s;
  s.pair_counts.assign(pairs.size(), 0.0);
  auto visit = [&](auto& self, const AstNode& n) -> void {
    const Role r = n.role();
    s.role_counts[static_cast<std::size_t>(r)] += 1;
    s.child_histogram[child_bucket(n.child_count())] += 1;
    if (n.type_role == Role::FunctionDefinition) {
      s.functions_with_variables += n.has_variables;
      s.functions_with_inputs += n.has_input_params;
      s.functions_with_outputs += n.has_output_params;
    }
    for (const auto& c : n.children) {
      const Role cr = c.role();
      for (std::size_t p = 0; p < pairs.size(); ++p)
        if (pairs[p].parent == r && pairs[p].child == cr) s.pair_counts[p] += 1;
      self(self, c);
    }
  };
  for (const auto& root : tree.roots) visit(visit, root);
  return s;
}

AstProjection AstProjection::zeros(Eigen::Index input_dim, Eigen::Index output_dim) {
  return AstProjection{Matrix::Zero(input_dim, output_dim), Matrix::Zero(1, output_dim)};
}

AstProjection AstProjection::init(Eigen::Index input_dim, Eigen::Index output_dim, std::uint64_t seed) {
  Rng rng(seed);
  return AstProjection{detail::xavier_uniform(input_dim, output_dim, rng), Matrix::Zero(1, output_dim)};
}

void AstProjection::validate(Eigen::Index input_dim, Eigen::Index output_dim) const {
  detail::expect_shape(weight, input_dim, output_dim, "ast.weight");
  detail::expect_shape(bias, 1, output_dim, "ast.bias");
}

ad::Var project_ast_features(ad::Binder& bind, ad::Var raw_row, const AstProjection& params) {
  return ad::relu(ad::add_row(ad::matmul(raw_row, bind(params.weight)), bind(params.bias)));
}

Vector project_ast_features(const Vector& raw, const AstProjection& params) {
  if (raw.size() != params.weight.rows())
    throw Error(ErrorKind::DimensionMismatch, "raw AST record width " + std::to_string(raw.size()) +
                                                  " != projection input " + std::to_string(params.weight.rows()));
  ad::Tape tape;
  ad::Binder bind(tape);
  return project_ast_features(bind, tape.constant(raw.transpose()), params).value().transpose();
}

}  // namespace multicfv::ast
