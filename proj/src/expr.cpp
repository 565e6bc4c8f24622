#include "mobilectl/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "mobilectl/error.hpp"

namespace mobilectl {

enum class Op { Num, VarX, VarT, VarY, Neg, Add, Sub, Mul, Div, Pow, Exp, Sin, Cos, Atan, Sqrt, Abs, Bump };

struct Expr::Node {
    Op op = Op::Num;
    double value = 0.0;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodeP = std::shared_ptr<const Expr::Node>;

NodeP leaf(Op op, double v = 0.0) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->value = v;
    return n;
}

NodeP unary(Op op, NodeP a) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    return n;
}

NodeP binary(Op op, NodeP a, NodeP b) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

class Parser {
public:
    Parser(std::string_view s, std::string_view vars) : s_(s), vars_(vars) {}

    NodeP parse() {
        NodeP e = sum();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

    unsigned used = 0;

private:
    [[noreturn]] void fail(const std::string& msg) const {
        std::ostringstream os;
        os << "expression \"" << s_ << "\": " << msg << " at column " << pos_ + 1;
        throw Error(ErrorKind::Config, os.str());
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodeP sum() {
        NodeP l = product();
        for (;;) {
            if (eat('+')) l = binary(Op::Add, l, product());
            else if (eat('-')) l = binary(Op::Sub, l, product());
            else return l;
        }
    }

    NodeP product() {
        NodeP l = signed_power();
        for (;;) {
            if (eat('*')) l = binary(Op::Mul, l, signed_power());
            else if (eat('/')) l = binary(Op::Div, l, signed_power());
            else return l;
        }
    }

    NodeP signed_power() {
        if (eat('-')) return unary(Op::Neg, signed_power());
        if (eat('+')) return signed_power();
        return power();
    }

    // -x^2 = -(x^2); 2^-1 is allowed
    NodeP power() {
        NodeP base = atom();
        if (eat('^')) return binary(Op::Pow, base, signed_power());
        return base;
    }

    NodeP atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodeP e = sum();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodeP number() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t q = pos_ + 1;
            if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
            if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
                pos_ = q;
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            }
        }
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (ec != std::errc() || p != s_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return leaf(Op::Num, v);
    }

    NodeP name() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string_view id = s_.substr(start, pos_ - start);
        if (id == "pi") return leaf(Op::Num, std::numbers::pi);
        if (id == "e") return leaf(Op::Num, std::numbers::e);
        if (id.size() == 1 && (id[0] == 'x' || id[0] == 't' || id[0] == 'y')) {
            if (vars_.find(id[0]) == std::string_view::npos) {
                pos_ = start;
                fail("variable '" + std::string(id) + "' is not allowed here");
            }
            used |= 1u << (id[0] == 'x' ? 0 : id[0] == 't' ? 1 : 2);
            return leaf(id[0] == 'x' ? Op::VarX : id[0] == 't' ? Op::VarT : Op::VarY);
        }
        static const std::pair<std::string_view, Op> fns[] = {{"exp", Op::Exp},     {"sin", Op::Sin},
                                                               {"cos", Op::Cos},     {"arctan", Op::Atan},
                                                               {"sqrt", Op::Sqrt},   {"abs", Op::Abs},
                                                               {"bump", Op::Bump}};
        for (const auto& [fn, op] : fns) {
            if (id == fn) {
                if (!eat('(')) fail("'" + std::string(id) + "' needs an argument in parentheses");
                NodeP arg = sum();
                if (!eat(')')) fail("missing ')'");
                return unary(op, arg);
            }
        }
        pos_ = start;
        fail("unknown name '" + std::string(id) + "'");
    }

    std::string_view s_;
    std::string_view vars_;
    std::size_t pos_ = 0;
};

double eval(const Expr::Node& n, double x, double t, double y) {
    switch (n.op) {
        case Op::Num: return n.value;
        case Op::VarX: return x;
        case Op::VarT: return t;
        case Op::VarY: return y;
        case Op::Neg: return -eval(*n.a, x, t, y);
        case Op::Add: return eval(*n.a, x, t, y) + eval(*n.b, x, t, y);
        case Op::Sub: return eval(*n.a, x, t, y) - eval(*n.b, x, t, y);
        case Op::Mul: return eval(*n.a, x, t, y) * eval(*n.b, x, t, y);
        case Op::Div: return eval(*n.a, x, t, y) / eval(*n.b, x, t, y);
        case Op::Pow: return std::pow(eval(*n.a, x, t, y), eval(*n.b, x, t, y));
        case Op::Exp: return std::exp(eval(*n.a, x, t, y));
        case Op::Sin: return std::sin(eval(*n.a, x, t, y));
        case Op::Cos: return std::cos(eval(*n.a, x, t, y));
        case Op::Atan: return std::atan(eval(*n.a, x, t, y));
        case Op::Sqrt: return std::sqrt(eval(*n.a, x, t, y));
        case Op::Abs: return std::abs(eval(*n.a, x, t, y));
        case Op::Bump: {
            const double s = eval(*n.a, x, t, y);
            return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
        }
    }
    return 0.0;
}

}  // namespace

Expr Expr::compile(std::string_view source, std::string_view vars) {
    Parser p(source, vars);
    Expr e;
    e.root_ = p.parse();
    e.source_ = std::string(source);
    e.used_ = p.used;
    return e;
}

double Expr::operator()(double x, double t, double y) const { return root_ ? eval(*root_, x, t, y) : 0.0; }

bool Expr::uses(char var) const noexcept {
    switch (var) {
        case 'x': return used_ & 1u;
        case 't': return used_ & 2u;
        case 'y': return used_ & 4u;
        default: return false;
    }
}

}  // namespace mobilectl
