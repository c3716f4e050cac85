#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multicfv/autodiff.hpp"

namespace multicfv::ast {

// Node roles tracked by the syntax features, plus a catch-all.
enum class Role : std::uint8_t {
  StateVariableDeclaration,
  EmitStatement,
  Contract,  // "contract"
  Conditional,
  FunctionCall,
  NumberLiteral,
  ThrowStatement,
  ExpressionStatement,
  MemberAccess,
  ReturnStatement,
  IndexAccess,
  ForStatement,
  StringLiteral,
  Interface,  // "interface"
  TupleExpression,
  BooleanLiteral,
  IfStatement,
  ModifierDefinition,
  StructDefinition,
  EventDefinition,
  InlineAssemblyStatement,
  WhileStatement,
  Library,  // "library"
  Identifier,
  UnaryOperation,
  VariableDeclarationStatement,
  PragmaDirective,
  BinaryOperation,
  ElementaryTypeNameExpression,
  EnumDefinition,
  ContractDefinition,
  FunctionDefinition,
  UsingForDeclaration,
  Block,  // "block"
  Other,
};

inline constexpr std::size_t kNamedRoleCount = 34;
inline constexpr std::size_t kRoleCount = kNamedRoleCount + 1;

std::string_view role_name(Role role);
/// Exact role name lookup ("contract", "IfStatement", ..); nullopt for unknown.
std::optional<Role> role_from_name(std::string_view name);

struct AstNode {
  std::string node_type;  // as written in the document
  Role type_role = Role::Other;
  std::string kind;
  bool has_variables = false;
  bool has_input_params = false;
  bool has_output_params = false;
  std::vector<AstNode> children;

  std::size_t child_count() const { return children.size(); }
  /// The sub-kind when it names a role (contract/interface/library), else the type's role.
  Role role() const;
};

struct AstTree {
  // Top-level nodes. A SourceUnit wrapper is unwrapped into its children.
  std::vector<AstNode> roots;
  std::map<std::string, std::size_t> unknown_types;  // node_type -> occurrences

  std::size_t node_count() const;
  std::size_t unknown_count() const;
};

/// Walks a JSON AST: any object carrying a string "nodeType" or "type" field
/// is a node; typed objects nested anywhere under it (directly, in arrays, or
/// inside untyped objects) are its children. Throws Error(MalformedAst).
AstTree parse_ast(std::string_view json_text, std::string_view source_label = "<memory>");
AstTree parse_ast_file(const std::filesystem::path& path);

struct RolePair {
  Role parent;
  Role child;
  auto operator<=>(const RolePair&) const = default;
};

std::vector<RolePair> default_role_pairs();
/// "Parent>Child,Parent>Child" using role names. Throws Error(ConfigError).
std::vector<RolePair> parse_role_pairs(std::string_view text);
std::string format_role_pairs(std::span<const RolePair> pairs);

inline constexpr std::size_t kChildBuckets = 5;  // 0, 1, 2, 3-5, 6+
std::size_t child_bucket(std::size_t child_count);

struct AstStatistics {
  std::array<double, kRoleCount> role_counts{};
  std::vector<double> pair_counts;
  std::array<double, kChildBuckets> child_histogram{};
  double functions_with_variables = 0;
  double functions_with_inputs = 0;
  double functions_with_outputs = 0;

  /// roles | pairs | child histogram | function flags
  Vector flatten() const;
};

std::size_t raw_feature_width(std::size_t pair_count);

AstStatistics ast_statistics(const AstTree& tree, std::span<const RolePair> pairs);

/// Affine + ReLU projection from the raw statistics record to the syntax feature vector.
struct AstProjection {
  Matrix weight;  // raw_width x output_dim
  Matrix bias;    // 1 x output_dim

  static AstProjection zeros(Eigen::Index input_dim, Eigen::Index output_dim);
  static AstProjection init(Eigen::Index input_dim, Eigen::Index output_dim, std::uint64_t seed);
  void validate(Eigen::Index input_dim, Eigen::Index output_dim) const;

  template <class F>
  void visit(F&& f) {
    f("ast.weight", weight);
    f("ast.bias", bias);
  }
  template <class F>
  void visit(F&& f) const {
    f("ast.weight", weight);
    f("ast.bias", bias);
  }
};

Vector project_ast_features(const Vector& raw, const AstProjection& params);
ad::Var project_ast_features(ad::Binder& bind, ad::Var raw_row, const AstProjection& params);

}  // namespace multicfv::ast
