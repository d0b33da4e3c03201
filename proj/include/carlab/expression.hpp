#pragma once

// Minimal arithmetic expressions for config-driven coefficients and sources:
// +, -, *, /, ^, sin, cos, exp, variables x (alias x1), x1, x2, t, and the
// constant pi. Parsed once into an AST and evaluated per grid node.

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "carlab/errors.hpp"

namespace carlab {

class Expression {
public:
    Expression() = default;  // evaluates to 0

    static Expression parse(const std::string& text) {
        Parser p(text);
        Expression e;
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (!p.at_end()) {
            throw ConfigError("expression: trailing input at position " +
                              std::to_string(p.pos()) + " in '" + text + "'");
        }
        e.text_ = text;
        return e;
    }

    static Expression constant(double v) {
        Expression e;
        e.root_ = std::make_shared<Node>();
        e.root_->kind = Node::Kind::Number;
        e.root_->value = v;
        e.text_ = std::to_string(v);
        return e;
    }

    bool empty() const { return root_ == nullptr; }
    const std::string& text() const { return text_; }

    double operator()(double x1, double x2, double t) const {
        if (!root_) return 0.0;
        return eval(*root_, x1, x2, t);
    }

private:
    struct Node {
        enum class Kind { Number, Var, Unary, Binary, Call } kind = Kind::Number;
        double value = 0.0;
        int var = 0;       // 0:x1 1:x2 2:t
        char op = 0;       // + - * / ^ for Binary, '-' for Unary
        int func = 0;      // 0:sin 1:cos 2:exp
        std::shared_ptr<Node> lhs, rhs;
    };

    static double eval(const Node& n, double x1, double x2, double t) {
        switch (n.kind) {
            case Node::Kind::Number: return n.value;
            case Node::Kind::Var: return n.var == 0 ? x1 : (n.var == 1 ? x2 : t);
            case Node::Kind::Unary: return -eval(*n.lhs, x1, x2, t);
            case Node::Kind::Binary: {
                double a = eval(*n.lhs, x1, x2, t);
                double b = eval(*n.rhs, x1, x2, t);
                switch (n.op) {
                    case '+': return a + b;
                    case '-': return a - b;
                    case '*': return a * b;
                    case '/': return a / b;
                    case '^': return std::pow(a, b);
                }
                return 0.0;
            }
            case Node::Kind::Call: {
                double a = eval(*n.lhs, x1, x2, t);
                switch (n.func) {
                    case 0: return std::sin(a);
                    case 1: return std::cos(a);
                    case 2: return std::exp(a);
                }
                return 0.0;
            }
        }
        return 0.0;
    }

    class Parser {
    public:
        explicit Parser(const std::string& s) : s_(s) {}

        std::shared_ptr<Node> parse_expr() {
            auto lhs = parse_term();
            while (true) {
                skip_ws();
                if (peek() == '+' || peek() == '-') {
                    char op = get();
                    auto rhs = parse_term();
                    lhs = binary(op, lhs, rhs);
                } else {
                    return lhs;
                }
            }
        }

        void skip_ws() {
            while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
        }
        bool at_end() const { return i_ >= s_.size(); }
        std::size_t pos() const { return i_; }

    private:
        std::shared_ptr<Node> parse_term() {
            auto lhs = parse_factor();
            while (true) {
                skip_ws();
                if (peek() == '*' || peek() == '/') {
                    char op = get();
                    auto rhs = parse_factor();
                    lhs = binary(op, lhs, rhs);
                } else {
                    return lhs;
                }
            }
        }

        // '^' binds tighter than unary minus and is right-associative.
        std::shared_ptr<Node> parse_factor() {
            skip_ws();
            if (peek() == '-') {
                get();
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Unary;
                n->op = '-';
                n->lhs = parse_factor();
                return n;
            }
            if (peek() == '+') get();
            auto base = parse_primary();
            skip_ws();
            if (peek() == '^') {
                get();
                auto exp = parse_factor();
                return binary('^', base, exp);
            }
            return base;
        }

        std::shared_ptr<Node> parse_primary() {
            skip_ws();
            if (at_end()) throw ConfigError("expression: unexpected end of input in '" + s_ + "'");
            char c = peek();
            if (c == '(') {
                get();
                auto e = parse_expr();
                expect(')');
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                return parse_number();
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                return parse_ident();
            }
            throw ConfigError(std::string("expression: unexpected character '") + c + "' at position " +
                              std::to_string(i_) + " in '" + s_ + "'");
        }

        std::shared_ptr<Node> parse_number() {
            std::size_t start = i_;
            while (i_ < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' || s_[i_] == 'e' ||
                    s_[i_] == 'E' ||
                    ((s_[i_] == '+' || s_[i_] == '-') && i_ > start && (s_[i_ - 1] == 'e' || s_[i_ - 1] == 'E')))) {
                ++i_;
            }
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Number;
            try {
                n->value = std::stod(s_.substr(start, i_ - start));
            } catch (const std::exception&) {
                throw ConfigError("expression: bad number at position " + std::to_string(start) + " in '" + s_ + "'");
            }
            return n;
        }

        std::shared_ptr<Node> parse_ident() {
            std::size_t start = i_;
            while (i_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) {
                ++i_;
            }
            std::string name = s_.substr(start, i_ - start);
            if (name == "pi") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Number;
                n->value = M_PI;
                return n;
            }
            if (name == "x" || name == "x1" || name == "x2" || name == "t") {
                auto n = std::make_shared<Node>();
                n->kind = Node::Kind::Var;
                n->var = (name == "x2") ? 1 : (name == "t" ? 2 : 0);
                return n;
            }
            int func = -1;
            if (name == "sin") func = 0;
            if (name == "cos") func = 1;
            if (name == "exp") func = 2;
            if (func < 0) {
                throw ConfigError("expression: unknown identifier '" + name + "' in '" + s_ + "'");
            }
            skip_ws();
            expect('(');
            auto arg = parse_expr();
            expect(')');
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Call;
            n->func = func;
            n->lhs = arg;
            return n;
        }

        std::shared_ptr<Node> binary(char op, std::shared_ptr<Node> a, std::shared_ptr<Node> b) {
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Binary;
            n->op = op;
            n->lhs = std::move(a);
            n->rhs = std::move(b);
            return n;
        }

        char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
        char get() { return s_[i_++]; }
        void expect(char c) {
            skip_ws();
            if (peek() != c) {
                throw ConfigError(std::string("expression: expected '") + c + "' at position " +
                                  std::to_string(i_) + " in '" + s_ + "'");
            }
            get();
        }

        const std::string& s_;
        std::size_t i_ = 0;
    };

    std::shared_ptr<Node> root_;
    std::string text_;
};

}  // namespace carlab
