#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace mobilectl {

/// Tiny arithmetic language for coefficients and data:
///   numbers, pi, e, variables x t y,
///   + - * / ^ (right-assoc), unary minus, parentheses,
///   exp sin cos arctan sqrt abs, and bump(s) = exp(-1/(1-s^2)) for |s| < 1, else 0.
/// No assignment, no loops; evaluation always terminates.
class Expr {
public:
    Expr() = default;

    /// `vars` lists the admissible variable names (subset of "xty").
    /// Throws a config error with the column of the offending token.
    static Expr compile(std::string_view source, std::string_view vars = "xty");

    double operator()(double x = 0.0, double t = 0.0, double y = 0.0) const;

    const std::string& source() const noexcept { return source_; }
    bool uses(char var) const noexcept;
    /// No variables at all: the value is a constant.
    bool constant() const noexcept { return !uses('x') && !uses('t') && !uses('y'); }
    bool empty() const noexcept { return !root_; }

    struct Node;

private:
    std::string source_;
    std::shared_ptr<const Node> root_;
    unsigned used_ = 0;
};

}  // namespace mobilectl
