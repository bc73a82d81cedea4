#include "lyapflow/expr.hpp"

#include "lyapflow/errors.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace lyapflow::expr {

namespace {

NodePtr make(Op op, std::vector<NodePtr> args, double value = 0.0, int index = 0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = value;
    n->index = index;
    n->args = std::move(args);
    return n;
}

double ipow(double base, int n) {
    if (n < 0) return 1.0 / ipow(base, -n);
    double out = 1.0;
    while (n > 0) {
        if (n & 1) out *= base;
        base *= base;
        n >>= 1;
    }
    return out;
}

double apply_unary(Op op, double a) {
    switch (op) {
        case Op::sin: return std::sin(a);
        case Op::cos: return std::cos(a);
        case Op::exp: return std::exp(a);
        case Op::tanh: return std::tanh(a);
        default: return a;
    }
}

NodePtr func(Op op, NodePtr a) {
    if (is_constant(a)) return constant(apply_unary(op, a->value));
    return make(op, {std::move(a)});
}

NodePtr binary_minmax(Op op, NodePtr a, NodePtr b) {
    if (is_constant(a) && is_constant(b)) {
        return constant(op == Op::min ? std::min(a->value, b->value) : std::max(a->value, b->value));
    }
    return make(op, {std::move(a), std::move(b)});
}

bool is_variable_name(std::string_view name, int dim, int& index) {
    if (name == "x" && dim == 1) {
        index = 0;
        return true;
    }
    if (name.size() < 2 || name[0] != 'x') return false;
    int v = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), v);
    if (ec != std::errc() || ptr != name.data() + name.size() || name[1] == '0') return false;
    index = v - 1;
    return true;
}

class Parser {
public:
    Parser(std::string_view text, const SymbolTable& symbols) : text_(text), symbols_(symbols) {}

    NodePtr run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        NodePtr n = parse_expr();
        skip_ws();
        if (pos_ < text_.size()) {
            throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
        }
        return n;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = add(lhs, parse_term());
            } else if (accept('-')) {
                lhs = sub(lhs, parse_term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = mul(lhs, parse_unary());
            } else if (accept('/')) {
                lhs = div(lhs, parse_unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return neg(parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (!accept('^')) return base;
        skip_ws();
        const std::size_t start = pos_;
        int sign = 1;
        if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
            if (text_[pos_] == '-') sign = -1;
            ++pos_;
        }
        const std::size_t digits = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == digits) throw ParseError("exponent must be an integer literal", start);
        if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
            throw ParseError("exponent must be an integer literal", start);
        }
        int n = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + digits, text_.data() + pos_, n);
        if (ec != std::errc()) throw ParseError("exponent out of range", start);
        return pow(base, sign * n);
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
                pos_ = look;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc() || ptr != text_.data() + pos_) throw ParseError("malformed number", start);
        return constant(v);
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string_view name = text_.substr(start, pos_ - start);
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '(') return parse_call(name, start);
            return resolve(name, start);
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    NodePtr parse_call(std::string_view name, std::size_t start) {
        expect('(');
        std::vector<NodePtr> args;
        if (!accept(')')) {
            args.push_back(parse_expr());
            while (accept(',')) args.push_back(parse_expr());
            expect(')');
        }
        auto arity = [&](std::size_t n) {
            if (args.size() != n) {
                throw ParseError(std::string(name) + " expects " + std::to_string(n) + " argument(s)", start);
            }
        };
        if (name == "sin") return arity(1), func(Op::sin, args[0]);
        if (name == "cos") return arity(1), func(Op::cos, args[0]);
        if (name == "exp") return arity(1), func(Op::exp, args[0]);
        if (name == "tanh") return arity(1), func(Op::tanh, args[0]);
        if (name == "min") return arity(2), binary_minmax(Op::min, args[0], args[1]);
        if (name == "max") return arity(2), binary_minmax(Op::max, args[0], args[1]);
        throw NameError("unknown function '" + std::string(name) + "' at position " + std::to_string(start));
    }

    NodePtr resolve(std::string_view name, std::size_t start) {
        const int p = symbols_.param_index(name);
        if (p >= 0) return make(Op::parameter, {}, 0.0, p);
        if (name == "t" && symbols_.allow_time) return make(Op::time, {});
        int v = -1;
        if (is_variable_name(name, symbols_.dim, v) && v >= 0 && v < symbols_.dim) return variable(v);
        throw NameError("unknown identifier '" + std::string(name) + "' at position " + std::to_string(start));
    }

    std::string_view text_;
    const SymbolTable& symbols_;
    std::size_t pos_ = 0;
};

void collect(const NodePtr& n, Usage& u) {
    switch (n->op) {
        case Op::variable: u.variables[static_cast<std::size_t>(n->index)] = true; break;
        case Op::parameter: u.params[static_cast<std::size_t>(n->index)] = true; break;
        case Op::time: u.time = true; break;
        case Op::min:
        case Op::max: u.nonsmooth = true; break;
        default: break;
    }
    for (const auto& a : n->args) collect(a, u);
}

void print(const NodePtr& n, std::ostringstream& os) {
    auto bin = [&](const char* sym) {
        os << '(';
        print(n->args[0], os);
        os << ' ' << sym << ' ';
        print(n->args[1], os);
        os << ')';
    };
    auto call = [&](const char* name) {
        os << name << '(';
        for (std::size_t i = 0; i < n->args.size(); ++i) {
            if (i) os << ", ";
            print(n->args[i], os);
        }
        os << ')';
    };
    switch (n->op) {
        case Op::constant: os << n->value; break;
        case Op::variable: os << 'x' << n->index + 1; break;
        case Op::time: os << 't'; break;
        case Op::parameter: os << "p[" << n->index << ']'; break;
        case Op::add: bin("+"); break;
        case Op::sub: bin("-"); break;
        case Op::mul: bin("*"); break;
        case Op::div: bin("/"); break;
        case Op::neg: os << "-("; print(n->args[0], os); os << ')'; break;
        case Op::pow: os << '('; print(n->args[0], os); os << ")^" << n->index; break;
        case Op::sin: call("sin"); break;
        case Op::cos: call("cos"); break;
        case Op::exp: call("exp"); break;
        case Op::tanh: call("tanh"); break;
        case Op::min: call("min"); break;
        case Op::max: call("max"); break;
    }
}

void emit(const NodePtr& n, std::vector<std::pair<Op, std::pair<double, int>>>& out) {
    for (const auto& a : n->args) emit(a, out);
    out.push_back({n->op, {n->value, n->index}});
}

}  // namespace

int SymbolTable::param_index(std::string_view name) const {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i] == name) return static_cast<int>(i);
    }
    return -1;
}

NodePtr parse(std::string_view text, const SymbolTable& symbols) {
    return Parser(text, symbols).run();
}

NodePtr constant(double v) { return make(Op::constant, {}, v); }
NodePtr variable(int i) { return make(Op::variable, {}, 0.0, i); }

bool is_constant(const NodePtr& n) { return n->op == Op::constant; }
bool is_zero(const NodePtr& n) { return is_constant(n) && n->value == 0.0; }

namespace {
bool is_one(const NodePtr& n) { return is_constant(n) && n->value == 1.0; }
}  // namespace

NodePtr add(NodePtr a, NodePtr b) {
    if (is_constant(a) && is_constant(b)) return constant(a->value + b->value);
    if (is_zero(a)) return b;
    if (is_zero(b)) return a;
    return make(Op::add, {std::move(a), std::move(b)});
}

NodePtr sub(NodePtr a, NodePtr b) {
    if (is_constant(a) && is_constant(b)) return constant(a->value - b->value);
    if (is_zero(b)) return a;
    if (is_zero(a)) return neg(std::move(b));
    return make(Op::sub, {std::move(a), std::move(b)});
}

NodePtr mul(NodePtr a, NodePtr b) {
    if (is_constant(a) && is_constant(b)) return constant(a->value * b->value);
    if (is_zero(a) || is_zero(b)) return constant(0.0);
    if (is_one(a)) return b;
    if (is_one(b)) return a;
    return make(Op::mul, {std::move(a), std::move(b)});
}

NodePtr div(NodePtr a, NodePtr b) {
    if (is_constant(a) && is_constant(b) && b->value != 0.0) return constant(a->value / b->value);
    if (is_zero(a) && !is_zero(b)) return constant(0.0);
    if (is_one(b)) return a;
    return make(Op::div, {std::move(a), std::move(b)});
}

NodePtr neg(NodePtr a) {
    if (is_constant(a)) return constant(-a->value);
    if (a->op == Op::neg) return a->args[0];
    return make(Op::neg, {std::move(a)});
}

NodePtr pow(NodePtr a, int n) {
    if (n == 0) return constant(1.0);
    if (n == 1) return a;
    if (is_constant(a)) return constant(ipow(a->value, n));
    return make(Op::pow, {std::move(a)}, 0.0, n);
}

NodePtr differentiate(const NodePtr& n, int var) {
    switch (n->op) {
        case Op::constant:
        case Op::time:
        case Op::parameter: return constant(0.0);
        case Op::variable: return constant(n->index == var ? 1.0 : 0.0);
        case Op::add: return add(differentiate(n->args[0], var), differentiate(n->args[1], var));
        case Op::sub: return sub(differentiate(n->args[0], var), differentiate(n->args[1], var));
        case Op::mul: {
            const auto& a = n->args[0];
            const auto& b = n->args[1];
            return add(mul(differentiate(a, var), b), mul(a, differentiate(b, var)));
        }
        case Op::div: {
            const auto& a = n->args[0];
            const auto& b = n->args[1];
            const NodePtr da = differentiate(a, var);
            const NodePtr db = differentiate(b, var);
            if (is_zero(db)) return div(da, b);
            return div(sub(mul(da, b), mul(a, db)), pow(b, 2));
        }
        case Op::neg: return neg(differentiate(n->args[0], var));
        case Op::pow: {
            const auto& a = n->args[0];
            return mul(mul(constant(n->index), pow(a, n->index - 1)), differentiate(a, var));
        }
        case Op::sin: return mul(func(Op::cos, n->args[0]), differentiate(n->args[0], var));
        case Op::cos: return neg(mul(func(Op::sin, n->args[0]), differentiate(n->args[0], var)));
        case Op::exp: return mul(n, differentiate(n->args[0], var));
        case Op::tanh: return mul(sub(constant(1.0), pow(n, 2)), differentiate(n->args[0], var));
        case Op::min:
        case Op::max:
            throw UnsupportedExpression("cannot differentiate " + to_string(n) +
                                        ": min/max have no symbolic derivative");
    }
    return constant(0.0);
}

Usage usage(const NodePtr& n, int dim, int param_count) {
    Usage u;
    u.variables.assign(static_cast<std::size_t>(dim), false);
    u.params.assign(static_cast<std::size_t>(param_count), false);
    collect(n, u);
    return u;
}

std::string to_string(const NodePtr& n) {
    std::ostringstream os;
    os.precision(17);
    print(n, os);
    return os.str();
}

namespace {
constexpr std::size_t kMaxStack = 64;
}  // namespace

Program::Program(const NodePtr& root) {
    std::vector<std::pair<Op, std::pair<double, int>>> flat;
    emit(root, flat);
    std::size_t depth = 0;
    std::size_t max_depth = 0;
    for (const auto& [op, payload] : flat) {
        code_.push_back({op, payload.first, payload.second});
        switch (op) {
            case Op::constant:
            case Op::variable:
            case Op::time:
            case Op::parameter: ++depth; break;
            case Op::add:
            case Op::sub:
            case Op::mul:
            case Op::div:
            case Op::min:
            case Op::max: --depth; break;
            default: break;
        }
        max_depth = std::max(max_depth, depth);
    }
    if (max_depth > kMaxStack) throw InvalidArgument("expression too deeply nested");
    zero_ = expr::is_zero(root);
}

double Program::eval(std::span<const double> x, double t, std::span<const double> params) const {
    if (code_.empty()) return 0.0;
    std::array<double, kMaxStack> stack;
    std::size_t sp = 0;
    for (const Instr& in : code_) {
        switch (in.op) {
            case Op::constant: stack[sp++] = in.value; break;
            case Op::variable: stack[sp++] = x[static_cast<std::size_t>(in.index)]; break;
            case Op::time: stack[sp++] = t; break;
            case Op::parameter: stack[sp++] = params[static_cast<std::size_t>(in.index)]; break;
            case Op::add: --sp; stack[sp - 1] += stack[sp]; break;
            case Op::sub: --sp; stack[sp - 1] -= stack[sp]; break;
            case Op::mul: --sp; stack[sp - 1] *= stack[sp]; break;
            case Op::div: --sp; stack[sp - 1] /= stack[sp]; break;
            case Op::min: --sp; stack[sp - 1] = std::min(stack[sp - 1], stack[sp]); break;
            case Op::max: --sp; stack[sp - 1] = std::max(stack[sp - 1], stack[sp]); break;
            case Op::neg: stack[sp - 1] = -stack[sp - 1]; break;
            case Op::pow: stack[sp - 1] = ipow(stack[sp - 1], in.index); break;
            case Op::sin: stack[sp - 1] = std::sin(stack[sp - 1]); break;
            case Op::cos: stack[sp - 1] = std::cos(stack[sp - 1]); break;
            case Op::exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
            case Op::tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
        }
    }
    return stack[0];
}

}  // namespace lyapflow::expr
