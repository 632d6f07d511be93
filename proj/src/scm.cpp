#include "vcsr/scm.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace vcsr {

namespace {

void check_row(const std::vector<double>& table, size_t offset, int width, const char* name) {
    double sum = 0.0;
    for (int i = 0; i < width; ++i) {
        const double v = table[offset + i];
        if (!(v >= 0.0))
            throw std::invalid_argument(std::string("DiscreteSCM: negative entry in ") + name);
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument(std::string("DiscreteSCM: row of ") + name +
                                    " sums to " + std::to_string(sum));
}

void dirichlet_row(std::vector<double>& table, size_t offset, int width, Rng& rng,
                   double sharpen) {
    double sum = 0.0;
    for (int i = 0; i < width; ++i) {
        double u = -std::log(rng.uniform_open());
        if (sharpen != 1.0) u = std::pow(u, sharpen);
        table[offset + i] = u;
        sum += u;
    }
    for (int i = 0; i < width; ++i) table[offset + i] /= sum;
}

void check_index(int i, int n, const char* what) {
    if (i < 0 || i >= n)
        throw std::invalid_argument(std::string("DiscreteSCM: ") + what + " index " +
                                    std::to_string(i) + " outside [0, " + std::to_string(n) + ")");
}

}  // namespace

void DiscreteSCM::validate() const {
    if (nc < 1 || nv < 1 || np < 1 || nq < 1 || na < 1)
        throw std::invalid_argument("DiscreteSCM: all cardinalities must be >= 1");
    if (p_c.size() != static_cast<size_t>(nc) ||
        p_v_given_c.size() != static_cast<size_t>(nc) * nv ||
        p_p_given_v.size() != static_cast<size_t>(nv) * np ||
        p_a.size() != static_cast<size_t>(np) * nc * nq * na)
        throw std::invalid_argument("DiscreteSCM: table sizes do not match cardinalities");
    check_row(p_c, 0, nc, "P(C)");
    for (int c = 0; c < nc; ++c) check_row(p_v_given_c, static_cast<size_t>(c) * nv, nv, "P(V|C)");
    for (int v = 0; v < nv; ++v) check_row(p_p_given_v, static_cast<size_t>(v) * np, np, "P(P|V)");
    for (int p = 0; p < np; ++p)
        for (int c = 0; c < nc; ++c)
            for (int q = 0; q < nq; ++q)
                check_row(p_a, ((static_cast<size_t>(p) * nc + c) * nq + q) * na, na,
                          "P(A|P,C,Q)");
}

double DiscreteSCM::p_v_marginal(int v) const {
    check_index(v, nv, "v");
    double s = 0.0;
    for (int c = 0; c < nc; ++c) s += p_c[c] * p_v_given_c[static_cast<size_t>(c) * nv + v];
    return s;
}

std::vector<double> DiscreteSCM::frontdoor_adjust(int v, int q) const {
    check_index(v, nv, "v");
    check_index(q, nq, "q");
    std::vector<double> pv(nv, 0.0);
    for (int vp = 0; vp < nv; ++vp) pv[vp] = p_v_marginal(vp);

    std::vector<double> out(na, 0.0);
    for (int p = 0; p < np; ++p) {
        const double w_p = p_p_given_v[static_cast<size_t>(v) * np + p];
        if (w_p == 0.0) continue;
        for (int vp = 0; vp < nv; ++vp) {
            if (pv[vp] == 0.0) continue;
            // P(A|p, v', q) from the joint: the confounder posterior given v'
            // weighs the answer mechanism (P is independent of C given V).
            for (int c = 0; c < nc; ++c) {
                const double post_c =
                    p_c[c] * p_v_given_c[static_cast<size_t>(c) * nv + vp] / pv[vp];
                if (post_c == 0.0) continue;
                const double w = w_p * pv[vp] * post_c;
                for (int a = 0; a < na; ++a) out[a] += w * a_given(p, c, q, a);
            }
        }
    }
    return out;
}

std::vector<double> DiscreteSCM::interventional_truth(int v, int q) const {
    check_index(v, nv, "v");
    check_index(q, nq, "q");
    std::vector<double> out(na, 0.0);
    for (int c = 0; c < nc; ++c) {
        if (p_c[c] == 0.0) continue;
        for (int p = 0; p < np; ++p) {
            const double w = p_c[c] * p_p_given_v[static_cast<size_t>(v) * np + p];
            if (w == 0.0) continue;
            for (int a = 0; a < na; ++a) out[a] += w * a_given(p, c, q, a);
        }
    }
    return out;
}

std::vector<double> DiscreteSCM::naive_conditional(int v, int q) const {
    check_index(v, nv, "v");
    check_index(q, nq, "q");
    const double pv = p_v_marginal(v);
    if (pv == 0.0)
        throw std::invalid_argument("DiscreteSCM: conditioning on zero-probability video " +
                                    std::to_string(v));
    std::vector<double> out(na, 0.0);
    for (int c = 0; c < nc; ++c) {
        const double post_c = p_c[c] * p_v_given_c[static_cast<size_t>(c) * nv + v] / pv;
        if (post_c == 0.0) continue;
        for (int p = 0; p < np; ++p) {
            const double w = post_c * p_p_given_v[static_cast<size_t>(v) * np + p];
            for (int a = 0; a < na; ++a) out[a] += w * a_given(p, c, q, a);
        }
    }
    return out;
}

DiscreteSCM DiscreteSCM::random(int nc, int nv, int np, int nq, int na, Rng& rng,
                                double sharpen) {
    if (nc < 1 || nv < 1 || np < 1 || nq < 1 || na < 1)
        throw std::invalid_argument("DiscreteSCM::random: cardinalities must be >= 1");
    DiscreteSCM scm;
    scm.nc = nc;
    scm.nv = nv;
    scm.np = np;
    scm.nq = nq;
    scm.na = na;
    scm.p_c.resize(nc);
    scm.p_v_given_c.resize(static_cast<size_t>(nc) * nv);
    scm.p_p_given_v.resize(static_cast<size_t>(nv) * np);
    scm.p_a.resize(static_cast<size_t>(np) * nc * nq * na);
    dirichlet_row(scm.p_c, 0, nc, rng, sharpen);
    for (int c = 0; c < nc; ++c)
        dirichlet_row(scm.p_v_given_c, static_cast<size_t>(c) * nv, nv, rng, sharpen);
    for (int v = 0; v < nv; ++v)
        dirichlet_row(scm.p_p_given_v, static_cast<size_t>(v) * np, np, rng, sharpen);
    for (int p = 0; p < np; ++p)
        for (int c = 0; c < nc; ++c)
            for (int q = 0; q < nq; ++q)
                dirichlet_row(scm.p_a, ((static_cast<size_t>(p) * nc + c) * nq + q) * na, na,
                              rng, sharpen);
    return scm;
}

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& want_label, int width,
                              int line_no) {
    const auto colon = line.find(':');
    if (colon == std::string::npos)
        throw std::runtime_error("scm file line " + std::to_string(line_no) + ": missing ':'");
    std::string label = line.substr(0, colon);
    while (!label.empty() && label.back() == ' ') label.pop_back();
    if (label != want_label)
        throw std::runtime_error("scm file line " + std::to_string(line_no) + ": expected row '" +
                                 want_label + "', got '" + label + "'");
    std::istringstream is(line.substr(colon + 1));
    std::vector<double> row(width);
    for (int i = 0; i < width; ++i) {
        if (!(is >> row[i]))
            throw std::runtime_error("scm file line " + std::to_string(line_no) + ": row '" +
                                     want_label + "' needs " + std::to_string(width) + " values");
    }
    double extra;
    if (is >> extra)
        throw std::runtime_error("scm file line " + std::to_string(line_no) + ": row '" +
                                 want_label + "' has more than " + std::to_string(width) +
                                 " values");
    return row;
}

std::string next_content_line(std::istream& in, int& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        return line.substr(start);
    }
    throw std::runtime_error("scm file: unexpected end of file at line " +
                             std::to_string(line_no));
}

}  // namespace

DiscreteSCM DiscreteSCM::load(std::istream& in) {
    int line_no = 0;
    std::string header = next_content_line(in, line_no);
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    if (magic != "scm-v1")
        throw std::runtime_error("scm file: expected header 'scm-v1 ...', got '" + header + "'");
    DiscreteSCM scm;
    std::string kv;
    while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("scm file: bad header field '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const int val = std::stoi(kv.substr(eq + 1));
        if (key == "C")
            scm.nc = val;
        else if (key == "V")
            scm.nv = val;
        else if (key == "P")
            scm.np = val;
        else if (key == "Q")
            scm.nq = val;
        else if (key == "A")
            scm.na = val;
        else
            throw std::runtime_error("scm file: unknown header field '" + key + "'");
    }
    if (scm.nc < 1 || scm.nv < 1 || scm.np < 1 || scm.nq < 1 || scm.na < 1)
        throw std::runtime_error("scm file: header must set C, V, P, Q, A to positive values");

    auto read_row = [&](const std::string& label, int width) {
        return parse_row(next_content_line(in, line_no), label, width, line_no);
    };

    scm.p_c = read_row("P_C", scm.nc);
    scm.p_v_given_c.reserve(static_cast<size_t>(scm.nc) * scm.nv);
    for (int c = 0; c < scm.nc; ++c) {
        auto row = read_row("P_V|C c=" + std::to_string(c), scm.nv);
        scm.p_v_given_c.insert(scm.p_v_given_c.end(), row.begin(), row.end());
    }
    scm.p_p_given_v.reserve(static_cast<size_t>(scm.nv) * scm.np);
    for (int v = 0; v < scm.nv; ++v) {
        auto row = read_row("P_P|V v=" + std::to_string(v), scm.np);
        scm.p_p_given_v.insert(scm.p_p_given_v.end(), row.begin(), row.end());
    }
    scm.p_a.reserve(static_cast<size_t>(scm.np) * scm.nc * scm.nq * scm.na);
    for (int p = 0; p < scm.np; ++p)
        for (int c = 0; c < scm.nc; ++c)
            for (int q = 0; q < scm.nq; ++q) {
                auto row = read_row("P_A|PCQ p=" + std::to_string(p) + " c=" + std::to_string(c) +
                                        " q=" + std::to_string(q),
                                    scm.na);
                scm.p_a.insert(scm.p_a.end(), row.begin(), row.end());
            }
    scm.validate();
    return scm;
}

DiscreteSCM DiscreteSCM::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scm file " + path);
    return load(in);
}

void DiscreteSCM::save(std::ostream& out) const {
    validate();
    out << "# Discrete SCM: C -> V, V -> P, {P, C, Q} -> A. One probability row per line.\n";
    out << "scm-v1 C=" << nc << " V=" << nv << " P=" << np << " Q=" << nq << " A=" << na << "\n";
    out << std::setprecision(17);
    auto emit = [&](const std::string& label, const std::vector<double>& table, size_t offset,
                    int width) {
        out << label << ":";
        for (int i = 0; i < width; ++i) out << " " << table[offset + i];
        out << "\n";
    };
    emit("P_C", p_c, 0, nc);
    for (int c = 0; c < nc; ++c)
        emit("P_V|C c=" + std::to_string(c), p_v_given_c, static_cast<size_t>(c) * nv, nv);
    for (int v = 0; v < nv; ++v)
        emit("P_P|V v=" + std::to_string(v), p_p_given_v, static_cast<size_t>(v) * np, np);
    for (int p = 0; p < np; ++p)
        for (int c = 0; c < nc; ++c)
            for (int q = 0; q < nq; ++q)
                emit("P_A|PCQ p=" + std::to_string(p) + " c=" + std::to_string(c) +
                         " q=" + std::to_string(q),
                     p_a, ((static_cast<size_t>(p) * nc + c) * nq + q) * na, na);
}

void DiscreteSCM::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scm file " + path);
    save(out);
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("total_variation: distributions differ in length");
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return 0.5 * s;
}

std::pair<DiscreteSCM, double> find_confounded_scm(int trials, uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("find_confounded_scm: trials must be >= 1");
    Rng rng(seed);
    DiscreteSCM best;
    double best_tv = -1.0;
    for (int t = 0; t < trials; ++t) {
        // Sharper rows concentrate the confounder posterior and widen the
        // naive-vs-interventional gap.
        const double sharpen = 1.0 + (t % 3);
        DiscreteSCM scm = DiscreteSCM::random(3, 4, 4, 2, 5, rng, sharpen);
        double worst = 0.0;
        for (int v = 0; v < scm.nv; ++v) {
            if (scm.p_v_marginal(v) == 0.0) continue;
            for (int q = 0; q < scm.nq; ++q)
                worst = std::max(worst, total_variation(scm.naive_conditional(v, q),
                                                        scm.interventional_truth(v, q)));
        }
        if (worst > best_tv) {
            best_tv = worst;
            best = scm;
        }
    }
    return {best, best_tv};
}

}  // namespace vcsr
