#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lyapflow::expr {

enum class Op {
    constant,
    variable,   // x_{index+1}
    time,
    parameter,  // params[index]
    add,
    sub,
    mul,
    div,
    neg,
    pow,        // integer power, exponent in `index`
    sin,
    cos,
    exp,
    tanh,
    min,
    max,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::constant;
    double value = 0.0;
    int index = 0;
    std::vector<NodePtr> args;
};

/// Names an expression may refer to: x1..x{dim} (or bare `x` when dim == 1),
/// `t` when time is allowed, and the listed parameters.
struct SymbolTable {
    int dim = 0;
    std::vector<std::string> params;
    bool allow_time = true;

    int param_index(std::string_view name) const;  // -1 when absent
};

/// Parses `text`; throws ParseError (with offset) or NameError.
NodePtr parse(std::string_view text, const SymbolTable& symbols);

/// ∂/∂x_{var+1}; throws UnsupportedExpression on min/max.
NodePtr differentiate(const NodePtr& node, int var);

// Constructors that fold constants and drop neutral elements.
NodePtr constant(double v);
NodePtr variable(int i);
NodePtr add(NodePtr a, NodePtr b);
NodePtr sub(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);
NodePtr div(NodePtr a, NodePtr b);
NodePtr neg(NodePtr a);
NodePtr pow(NodePtr a, int n);

bool is_constant(const NodePtr& n);
bool is_zero(const NodePtr& n);

struct Usage {
    std::vector<bool> variables;
    std::vector<bool> params;
    bool time = false;
    bool nonsmooth = false;  // contains min/max
};
Usage usage(const NodePtr& n, int dim, int param_count);

std::string to_string(const NodePtr& n);

/// Flat postfix form of an expression tree. Immutable and re-entrant.
class Program {
public:
    Program() = default;
    explicit Program(const NodePtr& root);

    double eval(std::span<const double> x, double t, std::span<const double> params) const;
    bool is_zero() const noexcept { return zero_; }

private:
    struct Instr {
        Op op;
        double value;
        int index;
    };
    std::vector<Instr> code_;
    bool zero_ = true;
};

}  // namespace lyapflow::expr
