#include "phishsim/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "phishsim/errors.hpp"

namespace phishsim {

Linkage parse_linkage(std::string_view name) {
    if (name == "single") return Linkage::Single;
    if (name == "average") return Linkage::Average;
    if (name == "complete") return Linkage::Complete;
    throw std::invalid_argument("unknown linkage: '" + std::string(name) + "'");
}

std::string to_string(Linkage linkage) {
    switch (linkage) {
        case Linkage::Single: return "single";
        case Linkage::Average: return "average";
        case Linkage::Complete: return "complete";
    }
    return "?";
}

std::size_t DendrogramNode::leaf_count() const {
    if (is_leaf()) return 1;
    return left->leaf_count() + right->leaf_count();
}

const std::string& DendrogramNode::min_leaf() const {
    if (is_leaf()) return id;
    const std::string& l = left->min_leaf();
    const std::string& r = right->min_leaf();
    return l < r ? l : r;
}

DendrogramNode agglomerate(const NcdMatrix& matrix, Linkage linkage) {
    const std::size_t n = matrix.size();
    if (n < 2) throw std::invalid_argument("agglomerate: need at least 2 items");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double a = matrix.at(i, j), b = matrix.at(j, i);
            if (std::isnan(a) || std::isnan(b) || a != b)
                throw std::invalid_argument("agglomerate: matrix is not symmetric at (" +
                                            std::to_string(i) + ", " + std::to_string(j) + ")");
        }
    }

    struct Cluster {
        std::unique_ptr<DendrogramNode> node;
        std::size_t size = 0;
        bool alive = false;
    };
    std::vector<Cluster> clusters(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto leaf = std::make_unique<DendrogramNode>();
        leaf->id = matrix.ids[i];
        clusters[i] = Cluster{std::move(leaf), 1, true};
    }

    // Inter-cluster distances, updated via Lance-Williams.
    std::vector<double> dist(matrix.values);
    auto d = [&](std::size_t i, std::size_t j) -> double& { return dist[i * n + j]; };

    for (std::size_t merges = 0; merges + 1 < n; ++merges) {
        // Smallest distance; ties resolve on the canonical (min-leaf) keys
        // of the pair so input permutations yield the same tree.
        std::size_t bi = n, bj = n;
        const std::string* bk_lo = nullptr;
        const std::string* bk_hi = nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            if (!clusters[i].alive) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!clusters[j].alive) continue;
                double cur = d(i, j);
                if (bi != n && cur > d(bi, bj)) continue;
                const std::string& mi = clusters[i].node->min_leaf();
                const std::string& mj = clusters[j].node->min_leaf();
                const std::string& lo = mi < mj ? mi : mj;
                const std::string& hi = mi < mj ? mj : mi;
                if (bi == n || cur < d(bi, bj) || lo < *bk_lo ||
                    (lo == *bk_lo && hi < *bk_hi)) {
                    bi = i;
                    bj = j;
                    bk_lo = &lo;
                    bk_hi = &hi;
                }
            }
        }

        double height = d(bi, bj);
        auto merged = std::make_unique<DendrogramNode>();
        merged->height = height;
        // Children ordered by min leaf id (canonical form).
        if (clusters[bi].node->min_leaf() <= clusters[bj].node->min_leaf()) {
            merged->left = std::move(clusters[bi].node);
            merged->right = std::move(clusters[bj].node);
        } else {
            merged->left = std::move(clusters[bj].node);
            merged->right = std::move(clusters[bi].node);
        }

        std::size_t na = clusters[bi].size, nb = clusters[bj].size;
        for (std::size_t x = 0; x < n; ++x) {
            if (!clusters[x].alive || x == bi || x == bj) continue;
            double dax = d(bi, x), dbx = d(bj, x);
            double nd = 0.0;
            switch (linkage) {
                case Linkage::Single: nd = std::min(dax, dbx); break;
                case Linkage::Complete: nd = std::max(dax, dbx); break;
                case Linkage::Average:
                    nd = (double(na) * dax + double(nb) * dbx) / double(na + nb);
                    break;
            }
            d(bi, x) = nd;
            d(x, bi) = nd;
        }
        clusters[bi].node = std::move(merged);
        clusters[bi].size = na + nb;
        clusters[bj].alive = false;
    }

    for (auto& c : clusters)
        if (c.alive) return std::move(*c.node);
    throw Error("agglomerate: no root produced");  // unreachable
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

bool needs_quoting(std::string_view id) {
    return id.empty() ||
           id.find_first_of(" ()[]{}:;,'\"\t\n") != std::string_view::npos;
}

void write_label(std::string& out, std::string_view id) {
    if (!needs_quoting(id)) {
        out += id;
        return;
    }
    out += '\'';
    for (char c : id) {
        if (c == '\'') out += "''";
        else out += c;
    }
    out += '\'';
}

void write_newick(std::string& out, const DendrogramNode& node, double parent_height) {
    if (node.is_leaf()) {
        write_label(out, node.id);
    } else {
        out += '(';
        write_newick(out, *node.left, node.height);
        out += ',';
        write_newick(out, *node.right, node.height);
        out += ')';
    }
    out += ':';
    out += fmt_double(parent_height - (node.is_leaf() ? 0.0 : node.height));
}

struct NewickParser {
    std::string_view text;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) {
        throw std::invalid_argument("newick parse error at offset " + std::to_string(pos) + ": " +
                                    what);
    }
    char peek() {
        if (pos >= text.size()) fail("unexpected end");
        return text[pos];
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos;
    }

    // Returns (node with heights reconstructed bottom-up, branch length).
    std::pair<DendrogramNode, double> parse_node() {
        DendrogramNode node;
        if (peek() == '(') {
            ++pos;
            auto [left, lb] = parse_node();
            expect(',');
            auto [right, rb] = parse_node();
            expect(')');
            node.height = left.height + lb;  // == right.height + rb by construction
            node.left = std::make_unique<DendrogramNode>(std::move(left));
            node.right = std::make_unique<DendrogramNode>(std::move(right));
        } else {
            node.id = parse_label();
        }
        double branch = 0.0;
        if (pos < text.size() && text[pos] == ':') {
            ++pos;
            branch = parse_number();
        }
        return {std::move(node), branch};
    }

    std::string parse_label() {
        std::string label;
        if (peek() == '\'') {
            ++pos;
            while (true) {
                char c = peek();
                ++pos;
                if (c == '\'') {
                    if (pos < text.size() && text[pos] == '\'') {
                        label += '\'';
                        ++pos;
                    } else {
                        break;
                    }
                } else {
                    label += c;
                }
            }
        } else {
            while (pos < text.size() &&
                   std::string_view("():,;").find(text[pos]) == std::string_view::npos)
                label += text[pos++];
        }
        return label;
    }

    double parse_number() {
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isdigit(static_cast<unsigned char>(text[pos])) ||
                std::string_view("+-.eE").find(text[pos]) != std::string_view::npos))
            ++pos;
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + pos, value);
        if (ec != std::errc{} || ptr != text.data() + pos) fail("bad number");
        return value;
    }
};

void collect_merges(const DendrogramNode& node,
                    std::vector<const DendrogramNode*>& internals) {
    if (node.is_leaf()) return;
    collect_merges(*node.left, internals);
    collect_merges(*node.right, internals);
    internals.push_back(&node);
}

}  // namespace

std::string to_newick(const DendrogramNode& tree) {
    if (tree.is_leaf()) {
        std::string out;
        write_label(out, tree.id);
        out += ';';
        return out;
    }
    std::string out;
    out += '(';
    write_newick(out, *tree.left, tree.height);
    out += ',';
    write_newick(out, *tree.right, tree.height);
    out += ");";
    return out;
}

DendrogramNode parse_newick(std::string_view text) {
    NewickParser parser{text};
    auto [node, branch] = parser.parse_node();
    (void)branch;
    if (parser.pos >= text.size() || text[parser.pos] != ';')
        parser.fail("expected trailing ';'");
    return std::move(node);
}

std::string to_linkage_csv(const DendrogramNode& tree) {
    std::vector<const DendrogramNode*> internals;
    collect_merges(tree, internals);
    std::stable_sort(internals.begin(), internals.end(),
                     [](const DendrogramNode* a, const DendrogramNode* b) {
                         if (a->height != b->height) return a->height < b->height;
                         if (a->left->min_leaf() != b->left->min_leaf())
                             return a->left->min_leaf() < b->left->min_leaf();
                         return a->right->min_leaf() < b->right->min_leaf();
                     });
    std::ostringstream out;
    out << "left,right,height,size\n";
    for (const DendrogramNode* node : internals)
        out << node->left->min_leaf() << ',' << node->right->min_leaf() << ','
            << fmt_double(node->height) << ',' << node->leaf_count() << '\n';
    return out.str();
}

std::string matrix_to_csv(const NcdMatrix& matrix) {
    std::ostringstream out;
    out << "id";
    for (const auto& id : matrix.ids) out << ',' << id;
    out << '\n';
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << matrix.ids[i];
        for (std::size_t j = 0; j < matrix.size(); ++j) out << ',' << fmt_double(matrix.at(i, j));
        out << '\n';
    }
    return out.str();
}

}  // namespace phishsim
