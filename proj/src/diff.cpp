#include "labelrefine/diff.hpp"

#include <algorithm>
#include <sstream>

namespace labelrefine {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

namespace {

struct Op {
    char kind;  // ' ', '-', '+'
    std::size_t a;  // line index in before (valid for ' ' and '-')
    std::size_t b;  // line index in after (valid for ' ' and '+')
};

/// LCS edit script; prompts are short enough for the quadratic table.
std::vector<Op> edit_script(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    std::vector<Op> ops;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j]) {
            ops.push_back({' ', i++, j++});
        } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
            ops.push_back({'+', i, j++});
        } else {
            ops.push_back({'-', i++, j});
        }
    }
    return ops;
}

}  // namespace

std::string unified_diff(std::string_view before, std::string_view after, std::string_view before_name,
                         std::string_view after_name, int context) {
    const auto a = split_lines(before);
    const auto b = split_lines(after);
    const auto ops = edit_script(a, b);
    if (std::all_of(ops.begin(), ops.end(), [](const Op& o) { return o.kind == ' '; })) return {};

    std::ostringstream out;
    out << "--- " << before_name << "\n+++ " << after_name << "\n";
    const auto ctx = static_cast<std::size_t>(std::max(context, 0));
    std::size_t k = 0;
    while (k < ops.size()) {
        while (k < ops.size() && ops[k].kind == ' ') ++k;
        if (k == ops.size()) break;
        // hunk spans from first change minus context to last change (merging
        // changes separated by at most 2*context equal lines) plus context
        std::size_t start = k >= ctx ? k - ctx : 0;
        std::size_t end = k;
        while (true) {
            while (end < ops.size() && ops[end].kind != ' ') ++end;
            std::size_t eq = end;
            while (eq < ops.size() && ops[eq].kind == ' ') ++eq;
            if (eq < ops.size() && eq - end <= 2 * ctx) {
                end = eq;
                continue;
            }
            end = std::min(ops.size(), end + ctx);
            break;
        }
        std::size_t a_start = 0, b_start = 0, a_len = 0, b_len = 0;
        bool a_set = false, b_set = false;
        for (std::size_t t = start; t < end; ++t) {
            if (ops[t].kind != '+') {
                if (!a_set) a_start = ops[t].a, a_set = true;
                ++a_len;
            }
            if (ops[t].kind != '-') {
                if (!b_set) b_start = ops[t].b, b_set = true;
                ++b_len;
            }
        }
        if (!a_set) a_start = ops[start].a;
        if (!b_set) b_start = ops[start].b;
        out << "@@ -" << (a_len ? a_start + 1 : a_start) << ',' << a_len << " +" << (b_len ? b_start + 1 : b_start)
            << ',' << b_len << " @@\n";
        for (std::size_t t = start; t < end; ++t) {
            const Op& o = ops[t];
            out << o.kind << (o.kind == '+' ? b[o.b] : a[o.a]) << '\n';
        }
        k = end;
    }
    return out.str();
}

}  // namespace labelrefine
