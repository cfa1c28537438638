#include "ivlate/dgp.hpp"

#include "ivlate/error.hpp"
#include "ivlate/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ivlate {

using nlohmann::json;

namespace {

constexpr std::array<const char*, 4> kStratumNames{"always", "never", "complier", "defier"};

int treated(std::size_t stratum, int z) {
    switch (stratum) {
    case kAlways: return 1;
    case kNever: return 0;
    case kComplier: return z;
    default: return 1 - z;
    }
}

std::string cell_label(std::size_t i) { return "cell " + std::to_string(i); }

struct Sampler {
    std::vector<double> cum_mass;
    std::vector<std::array<double, 4>> cum_shares;
};

Sampler make_sampler(const DgpSpec& dgp) {
    Sampler s;
    double acc = 0.0;
    for (const auto& c : dgp.cells) {
        acc += c.mass;
        s.cum_mass.push_back(acc);
        std::array<double, 4> cs{};
        double a = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            a += c.shares[k];
            cs[k] = a;
        }
        s.cum_shares.push_back(cs);
    }
    return s;
}

struct Columns {
    std::vector<double> y;
    std::vector<std::uint8_t> d, z;
    std::vector<std::vector<std::int64_t>> x;
};

void draw_chunk(const DgpSpec& dgp, const Sampler& sampler, std::uint64_t seed, std::size_t chunk, std::size_t begin,
                std::size_t end, Columns& out) {
    Stream stream(seed, chunk);
    const std::size_t k = dgp.cells.size();
    for (std::size_t i = begin; i < end; ++i) {
        const double u = stream.uniform() * sampler.cum_mass.back();
        std::size_t c = static_cast<std::size_t>(std::upper_bound(sampler.cum_mass.begin(), sampler.cum_mass.end(), u) -
                                                 sampler.cum_mass.begin());
        c = std::min(c, k - 1);
        while (dgp.cells[c].mass <= 0.0 && c > 0) --c;
        const PopCell& cell = dgp.cells[c];
        const int z = stream.bernoulli(cell.e) ? 1 : 0;
        const double v = stream.uniform() * sampler.cum_shares[c][3];
        std::size_t s = 0;
        while (s < 3 && (v >= sampler.cum_shares[c][s] || cell.shares[s] <= 0.0)) ++s;
        const int d = treated(s, z);
        double y = cell.means[s][static_cast<std::size_t>(d)];
        if (cell.noise_sd > 0.0) y += cell.noise_sd * stream.normal();
        out.y[i] = y;
        out.d[i] = static_cast<std::uint8_t>(d);
        out.z[i] = static_cast<std::uint8_t>(z);
        for (std::size_t j = 0; j < out.x.size(); ++j) out.x[j][i] = cell.key[j];
    }
}

Sample draw(const DgpSpec& dgp, std::size_t n, std::uint64_t seed, bool parallel) {
    validate(dgp);
    if (n < 1) throw InputError("sample size must be at least 1");
    const Sampler sampler = make_sampler(dgp);
    Columns cols;
    cols.y.resize(n);
    cols.d.resize(n);
    cols.z.resize(n);
    cols.x.assign(dgp.covariates.size(), std::vector<std::int64_t>(n));
    const std::size_t chunks = (n + kDrawChunk - 1) / kDrawChunk;
    const auto count = static_cast<std::ptrdiff_t>(chunks);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ch = 0; ch < count; ++ch) {
            const auto u = static_cast<std::size_t>(ch);
            draw_chunk(dgp, sampler, seed, u, u * kDrawChunk, std::min(n, (u + 1) * kDrawChunk), cols);
        }
    } else {
        for (std::size_t u = 0; u < chunks; ++u) {
            draw_chunk(dgp, sampler, seed, u, u * kDrawChunk, std::min(n, (u + 1) * kDrawChunk), cols);
        }
    }
    return Sample(std::move(cols.y), std::move(cols.d), std::move(cols.z), dgp.covariates, std::move(cols.x));
}

} // namespace

double PopCell::p_treated(int z) const {
    return shares[kAlways] + (z == 1 ? shares[kComplier] : shares[kDefier]);
}

double PopCell::mean_y(int z) const {
    double acc = 0.0;
    for (std::size_t s = 0; s < 4; ++s) acc += shares[s] * means[s][static_cast<std::size_t>(treated(s, z))];
    return acc;
}

int PopCell::c() const {
    const double diff = shares[kComplier] - shares[kDefier];
    return diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
}

std::optional<double> PopCell::tau() const {
    const double moved = pi();
    if (!(moved > 0.0)) return std::nullopt;
    const double effect_c = means[kComplier][1] - means[kComplier][0];
    const double effect_f = means[kDefier][1] - means[kDefier][0];
    return (shares[kComplier] * effect_c + shares[kDefier] * effect_f) / moved;
}

bool DgpSpec::strong_monotone() const {
    return std::all_of(cells.begin(), cells.end(), [](const PopCell& c) { return c.shares[kDefier] == 0.0; });
}

std::size_t DgpSpec::distinct_e(double tol) const {
    std::vector<double> es;
    for (const auto& c : cells) {
        if (c.mass > 0.0) es.push_back(c.e);
    }
    std::sort(es.begin(), es.end());
    std::size_t k = 0;
    for (std::size_t i = 0; i < es.size(); ++i) {
        if (i == 0 || es[i] - es[i - 1] > tol) ++k;
    }
    return k;
}

void validate(const DgpSpec& dgp) {
    if (dgp.cells.empty()) throw InputError("DGP has no cells");
    std::set<CovariateKey> keys;
    double total = 0.0;
    for (std::size_t i = 0; i < dgp.cells.size(); ++i) {
        const PopCell& c = dgp.cells[i];
        if (c.key.size() != dgp.covariates.size()) {
            throw InputError(cell_label(i) + ": key length differs from the number of covariates");
        }
        if (!keys.insert(c.key).second) throw InputError(cell_label(i) + ": duplicate covariate key");
        if (!(c.mass >= 0.0) || !std::isfinite(c.mass)) throw InputError(cell_label(i) + ": mass must be non-negative");
        if (!(c.e > 0.0 && c.e < 1.0)) throw InputError(cell_label(i) + ": e must lie strictly between 0 and 1");
        double s = 0.0;
        for (const double v : c.shares) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(cell_label(i) + ": strata shares must be non-negative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InputError(cell_label(i) + ": strata shares must sum to 1");
        if (dgp.weak_monotone && c.shares[kComplier] > 0.0 && c.shares[kDefier] > 0.0) {
            throw InputError(cell_label(i) + ": compliers and defiers in the same cell violate weak monotonicity");
        }
        for (const auto& m : c.means) {
            if (!std::isfinite(m[0]) || !std::isfinite(m[1])) throw InputError(cell_label(i) + ": outcome means must be finite");
        }
        if (!(c.noise_sd >= 0.0) || !std::isfinite(c.noise_sd)) {
            throw InputError(cell_label(i) + ": noise_sd must be non-negative");
        }
        total += c.mass;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("cell masses must sum to 1");
}

DgpSpec relabel_instrument(const DgpSpec& dgp) {
    DgpSpec out = dgp;
    for (auto& c : out.cells) {
        c.e = 1.0 - c.e;
        std::swap(c.shares[kComplier], c.shares[kDefier]);
        std::swap(c.means[kComplier], c.means[kDefier]);
    }
    return out;
}

DgpSpec reorder_instrument(const DgpSpec& dgp) {
    DgpSpec out = dgp;
    for (auto& c : out.cells) {
        if (c.omega() < 0.0) {
            c.e = 1.0 - c.e;
            std::swap(c.shares[kComplier], c.shares[kDefier]);
            std::swap(c.means[kComplier], c.means[kDefier]);
        }
    }
    return out;
}

std::string dgp_to_json(const DgpSpec& dgp, int indent) {
    json j;
    j["name"] = dgp.name;
    j["covariates"] = dgp.covariates;
    j["weak_monotone"] = dgp.weak_monotone;
    j["cells"] = json::array();
    for (const auto& c : dgp.cells) {
        json jc;
        jc["key"] = c.key;
        jc["mass"] = c.mass;
        jc["e"] = c.e;
        jc["noise_sd"] = c.noise_sd;
        for (std::size_t s = 0; s < 4; ++s) {
            jc["strata"][kStratumNames[s]] = {{"share", c.shares[s]}, {"y0", c.means[s][0]}, {"y1", c.means[s][1]}};
        }
        j["cells"].push_back(jc);
    }
    return j.dump(indent);
}

DgpSpec dgp_from_json(const std::string& text) {
    DgpSpec dgp;
    try {
        const json j = json::parse(text);
        dgp.name = j.value("name", "");
        dgp.covariates = j.at("covariates").get<std::vector<std::string>>();
        dgp.weak_monotone = j.value("weak_monotone", true);
        for (const auto& jc : j.at("cells")) {
            PopCell c;
            c.key = jc.at("key").get<CovariateKey>();
            c.mass = jc.at("mass").get<double>();
            c.e = jc.at("e").get<double>();
            c.noise_sd = jc.value("noise_sd", 0.0);
            const auto& strata = jc.at("strata");
            for (auto it = strata.begin(); it != strata.end(); ++it) {
                const auto pos = std::find(kStratumNames.begin(), kStratumNames.end(), it.key());
                if (pos == kStratumNames.end()) throw InputError("unknown stratum '" + it.key() + "'");
            }
            for (std::size_t s = 0; s < 4; ++s) {
                if (!strata.contains(kStratumNames[s])) continue;
                const auto& js = strata.at(kStratumNames[s]);
                c.shares[s] = js.at("share").get<double>();
                c.means[s][0] = js.value("y0", 0.0);
                c.means[s][1] = js.value("y1", 0.0);
            }
            dgp.cells.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed DGP file: ") + e.what());
    }
    validate(dgp);
    return dgp;
}

DgpSpec load_dgp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open DGP file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return dgp_from_json(ss.str());
}

void save_dgp(const std::string& path, const DgpSpec& dgp) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write DGP file '" + path + "'");
    out << dgp_to_json(dgp) << '\n';
}

Sample draw_sample(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) { return draw(dgp, n, seed, true); }

Sample draw_sample_serial(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) { return draw(dgp, n, seed, false); }

} // namespace ivlate
