#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathint/config.hpp"
#include "pathint/ibp.hpp"
#include "pathint/infinite_horizon.hpp"
#include "pathint/io.hpp"
#include "pathint/measures.hpp"

namespace pathint {

struct RunOutcome {
    int exit_code = 0;
    std::string summary;
};

namespace detail {

class SummaryBuilder {
public:
    void pass(const std::string& line) { add("PASS", line); }
    void fail(const std::string& line) {
        add("FAIL", line);
        failed_ = true;
    }
    void check(bool ok, const std::string& line) { ok ? pass(line) : fail(line); }
    void info(const std::string& line) { add("INFO", line); }

    bool failed() const { return failed_; }
    std::string str() const { return out_.str(); }

private:
    void add(const char* tag, const std::string& line) { out_ << tag << ": " << line << "\n"; }
    std::ostringstream out_;
    bool failed_ = false;
};

inline std::unique_ptr<Manifold> manifold_from_config(const RunConfig& cfg) {
    const std::string kind = cfg.get("manifold", "kind", "euclidean");
    ManifoldParams p;
    p.dim = static_cast<int>(cfg.get_int("manifold", "dim", 2));
    p.radius = cfg.get_double("manifold", "radius", 1.0);
    p.curvature = cfg.get_double("manifold", "curvature", -1.0);
    if (cfg.find("manifold", "periods")) p.periods = cfg.get_list("manifold", "periods", "");
    return make_manifold(kind, p);
}

inline ChartPoint point_from_list(const Manifold& m, const std::vector<double>& coords,
                                  int chart = 0) {
    if (static_cast<int>(coords.size()) != m.dim())
        throw ConfigError("point has " + std::to_string(coords.size()) + " coords, manifold dim " +
                          std::to_string(m.dim()));
    Vec c(m.dim());
    for (int i = 0; i < m.dim(); ++i) c[i] = coords[static_cast<size_t>(i)];
    ChartPoint x{chart, c};
    m.require_domain(x);
    return x;
}

inline RadialBump bump_from_config(const RunConfig& cfg, const Manifold& m,
                                   const std::string& fallback_center) {
    RadialBump b;
    b.m = &m;
    b.center = point_from_list(m, cfg.get_list("experiment", "center", fallback_center));
    b.radius = cfg.get_double("experiment", "radius", 1.0);
    b.amplitude = cfg.get_double("experiment", "amplitude", 1.0);
    if (!(b.radius > 0)) throw ConfigError("[experiment] radius must be positive");
    return b;
}

inline std::string default_center_string(const Manifold& m) {
    std::string s;
    for (int i = 0; i < m.dim(); ++i) {
        if (i) s += ",";
        s += (i == 1 && m.name() == "hyperbolic2") ? "1.2" : (i == 0 ? "0.3" : "0.1");
    }
    return s;
}

inline nlohmann::json path_record_json(const PiecewiseGeodesicPath& path) {
    nlohmann::json j;
    for (const auto& [k, v] : path.manifold().spec_kv()) j["manifold"][k] = v;
    j["x0"]["chart"] = path.start().chart;
    j["x0"]["coords"] = std::vector<double>(path.start().coords.begin(),
                                            path.start().coords.end());
    j["times"] = path.partition().times;
    std::vector<std::vector<double>> b;
    for (int i = 0; i < path.coords().cols(); ++i) {
        std::vector<double> col(static_cast<size_t>(path.coords().rows()));
        for (int a = 0; a < path.coords().rows(); ++a) col[static_cast<size_t>(a)] = path.coords()(a, i);
        b.push_back(std::move(col));
    }
    j["b"] = b;
    nlohmann::json knots = nlohmann::json::array();
    for (const ChartPoint& k : path.knots()) {
        nlohmann::json kj;
        kj["chart"] = k.chart;
        kj["coords"] = std::vector<double>(k.coords.begin(), k.coords.end());
        knots.push_back(kj);
    }
    j["knots"] = knots;
    return j;
}

/// Rebuild a path from its JSON record by re-rolling the stored coordinates;
/// the recorded knots double as a consistency check.
inline PiecewiseGeodesicPath path_from_record(const Manifold& m, const nlohmann::json& j,
                                              double knot_tolerance = 1e-7) {
    DevelopmentDriver d;
    d.partition.times = j.at("times").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<std::vector<double>>>();
    const int n = m.dim();
    d.velocities.resize(n, static_cast<long>(b.size()));
    for (size_t i = 0; i < b.size(); ++i)
        for (int a = 0; a < n; ++a) d.velocities(a, static_cast<long>(i)) = b[i][static_cast<size_t>(a)];
    Vec c(n);
    const auto coords = j.at("x0").at("coords").get<std::vector<double>>();
    for (int a = 0; a < n; ++a) c[a] = coords[static_cast<size_t>(a)];
    ChartPoint x0{j.at("x0").at("chart").get<int>(), c};
    PiecewiseGeodesicPath path = develop(m, x0, canonical_frame(m, x0), d);
    const auto knots = j.at("knots");
    for (size_t k = 0; k < knots.size(); ++k) {
        Vec kc(n);
        const auto kcoords = knots[k].at("coords").get<std::vector<double>>();
        for (int a = 0; a < n; ++a) kc[a] = kcoords[static_cast<size_t>(a)];
        const ChartPoint recorded{knots[k].at("chart").get<int>(), kc};
        if (m.distance(recorded, path.knots()[k]) > knot_tolerance)
            throw NumericalError("path record: re-rolled knot deviates from the stored one");
    }
    return path;
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

inline void run_simulate(const RunConfig& cfg, const Manifold& m, long long samples,
                         std::uint64_t seed, CsvWriter& csv, SummaryBuilder& summary,
                         const std::filesystem::path& out_dir) {
    const double horizon = cfg.get_double("experiment", "horizon", 1.0);
    const int steps = static_cast<int>(cfg.get_int("experiment", "steps", 32));
    const ChartPoint x0 = default_start(m);
    const OrthonormalFrame frame0 = canonical_frame(m, x0);

    const int stride = std::max(1, steps / 16);
    std::vector<int> probe;
    for (int k = stride; k <= steps; k += stride) probe.push_back(k);
    if (probe.back() != steps) probe.push_back(steps);

    std::vector<std::vector<double>> d2(probe.size(),
                                        std::vector<double>(static_cast<size_t>(samples)));
    std::vector<double> cos_end(static_cast<size_t>(samples));
    parallel_for_samples(samples, [&](long long i) {
        RngStream rng(seed, stream_tag::kBrownian, static_cast<std::uint64_t>(i));
        BrownianSample bs = brownian_sample(m, x0, frame0, horizon, steps, rng);
        for (size_t p = 0; p < probe.size(); ++p) {
            const double dist =
                m.distance(x0, bs.path.knots()[static_cast<size_t>(probe[p])]);
            d2[p][static_cast<size_t>(i)] = dist * dist;
        }
        cos_end[static_cast<size_t>(i)] =
            std::cos(m.distance(x0, bs.path.knots().back()));
    });

    for (size_t p = 0; p < probe.size(); ++p) {
        const double t = horizon * probe[p] / steps;
        const SampleSummary s = summarize_mean(d2[p]);
        csv.field(t).field(s.mean).field(s.std_error).field(samples).field(seed);
        csv.end_row();
        if (m.name() == "euclidean") {
            const double expect = m.dim() * t;
            std::ostringstream line;
            line << "flat E d^2 at t=" << t << ": " << format_double(s.mean) << " vs " << expect;
            summary.check(std::abs(s.mean - expect) <= 4.0 * s.std_error, line.str());
        }
    }
    if (m.name() == "sphere2") {
        const SampleSummary s = summarize_mean(cos_end);
        const Sphere2& sph = dynamic_cast<const Sphere2&>(m);
        const double a2 = sph.radius() * sph.radius();
        const double expect = std::exp(-horizon / a2);
        std::ostringstream line;
        line << "sphere E cos(d/a) at T: " << format_double(s.mean) << " vs " << expect;
        summary.check(std::abs(s.mean - expect) <=
                          4.0 * s.std_error + 0.5 * horizon * horizon / steps,
                      line.str());
    }

    // replayable path records
    std::ostringstream paths;
    const long long keep = std::min<long long>(samples, 8);
    for (long long i = 0; i < keep; ++i) {
        RngStream rng(seed, stream_tag::kBrownian, static_cast<std::uint64_t>(i));
        BrownianSample bs = brownian_sample(m, x0, frame0, horizon, steps, rng);
        paths << path_record_json(bs.path).dump() << "\n";
    }
    write_text_file(out_dir / "paths.jsonl", paths.str());
    summary.info("wrote " + std::to_string(keep) + " path records to paths.jsonl");
}

inline void run_converge(const RunConfig& cfg, const Manifold& m, long long samples,
                         std::uint64_t seed, CsvWriter& csv, SummaryBuilder& summary) {
    const double horizon = cfg.get_double("experiment", "horizon", 0.5);
    const std::string kind_s = cfg.get("experiment", "kind", "g1");
    if (kind_s != "g0" && kind_s != "g1")
        throw ConfigError("[experiment] kind must be g0 or g1");
    const MetricKind kind = kind_s == "g1" ? MetricKind::G1 : MetricKind::G0;
    const std::vector<double> ns = cfg.get_list("experiment", "partitions", "2,4,8,16");
    const int resolution = static_cast<int>(cfg.get_int("experiment", "resolution", 96));

    const RadialBump bump = bump_from_config(cfg, m, default_center_string(m));
    std::vector<double> times = cfg.get_list("experiment", "times", format_double(horizon));
    std::vector<RadialBump> bumps(times.size(), bump);
    const CylinderFunction F = cylinder_from_bumps(times, bumps);

    std::vector<Partition> parts;
    for (double nd : ns) {
        const int nseg = static_cast<int>(std::llround(nd));
        if (nseg < 1 || std::abs(nd - nseg) > 1e-9)
            throw ConfigError("[experiment] partitions must be positive integers");
        for (double t : times) {
            const double ratio = t / horizon * nseg;
            if (std::abs(ratio - std::llround(ratio)) > 1e-9)
                throw ConfigError("cylinder time " + format_double(t) +
                                  " is not a knot of the N=" + std::to_string(nseg) +
                                  " partition");
        }
        parts.push_back(partition_uniform(horizon, nseg));
    }

    const ChartPoint x0 = default_start(m);
    auto hk = make_heat_kernel(m);
    const SweepResult sweep = convergence_sweep(m, x0, canonical_frame(m, x0), kind, F, parts,
                                                samples, seed, *hk, {}, resolution);

    csv.field(0.0).field(sweep.truth).field(sweep.truth_error).field(0.0).field(0LL).field(seed);
    csv.end_row();
    for (const SweepRow& row : sweep.rows) {
        csv.field(row.mesh)
            .field(row.est.mean)
            .field(row.est.std_error)
            .field(row.est.ess)
            .field(row.est.samples)
            .field(seed);
        csv.end_row();
    }
    summary.info("truth " + format_double(sweep.truth) + " +- " +
                 format_double(sweep.truth_error) + ", fitted error slope " +
                 format_double(sweep.fitted_slope));

    if (m.flat_chart()) {
        for (const SweepRow& row : sweep.rows) {
            std::ostringstream line;
            line << "flat N=" << row.segments << " within 3 stderr of truth";
            summary.check(std::abs(row.est.mean - sweep.truth) <=
                              3.0 * row.est.std_error + sweep.truth_error,
                          line.str());
        }
    } else {
        for (size_t i = 0; i + 1 < sweep.rows.size(); ++i) {
            const double e0 = std::abs(sweep.rows[i].est.mean - sweep.truth);
            const double e1 = std::abs(sweep.rows[i + 1].est.mean - sweep.truth);
            std::ostringstream line;
            line << "error nonincreasing within noise: N=" << sweep.rows[i].segments << " -> N="
                 << sweep.rows[i + 1].segments;
            summary.check(e1 <= e0 + 3.0 * (sweep.rows[i].est.std_error +
                                            sweep.rows[i + 1].est.std_error),
                          line.str());
        }
        const SweepRow& last = sweep.rows.back();
        const SweepRow& prev = sweep.rows[sweep.rows.size() - 2];
        const double err_last = std::abs(last.est.mean - sweep.truth);
        const double err_prev = std::abs(prev.est.mean - sweep.truth);
        std::ostringstream line;
        line << "finest N=" << last.segments << " bias bounded by noise + half the N="
             << prev.segments << " bias";
        summary.check(err_last <= 3.0 * last.est.std_error + 0.5 * err_prev + sweep.truth_error,
                      line.str());
    }
}

inline CameronMartinPath cm_path_from_config(const RunConfig& cfg, int dim, double horizon) {
    const std::string kind = cfg.get("experiment", "h", "hat");
    const double amp = cfg.get_double("experiment", "h_amplitude", 1.0);
    if (kind == "sine") {
        const int mode = static_cast<int>(cfg.get_int("experiment", "h_mode", 1));
        return CameronMartinPath::sine_mode(dim, 0, mode, amp, horizon);
    }
    if (kind != "hat") throw ConfigError("[experiment] h must be 'hat' or 'sine'");
    // fixed ramp profile over quarter nodes
    std::vector<double> nodes;
    for (int k = 0; k <= 4; ++k) nodes.push_back(horizon * k / 4.0);
    Eigen::MatrixXd vals = Eigen::MatrixXd::Zero(dim, 5);
    for (int k = 1; k <= 4; ++k) {
        vals(0, k) = amp * std::vector<double>{0.0, 0.3, 0.7, 0.9, 1.1}[static_cast<size_t>(k)];
        if (dim > 1)
            vals(1, k) = amp * std::vector<double>{0.0, -0.2, 0.1, 0.4, 0.6}[static_cast<size_t>(k)];
    }
    return CameronMartinPath::piecewise_linear(nodes, vals);
}

inline void run_ibp_check(const RunConfig& cfg, const Manifold& m, long long samples,
                          std::uint64_t seed, CsvWriter& csv, SummaryBuilder& summary) {
    const double horizon = cfg.get_double("experiment", "horizon", 1.0);
    const int steps = static_cast<int>(cfg.get_int("experiment", "steps", 64));
    const RadialBump bump = bump_from_config(cfg, m, default_center_string(m));
    const CylinderFunction F = single_bump_cylinder(horizon, bump);
    const CameronMartinPath h = cm_path_from_config(cfg, m.dim(), horizon);
    const ChartPoint x0 = default_start(m);
    const OrthonormalFrame frame0 = canonical_frame(m, x0);

    double prev_residual = 0.0;
    bool prev_ok = false;
    for (const int st : {steps, 2 * steps}) {
        const IbpResult r = ibp_residual(m, x0, frame0, F, h, horizon, st, samples, seed);
        const double allowance = m.flat_chart() ? 0.0 : 0.5 * horizon / st;
        csv.field(st)
            .field(r.lhs.mean)
            .field(r.lhs.std_error)
            .field(r.rhs.mean)
            .field(r.rhs.std_error)
            .field(r.residual)
            .field(r.residual_se)
            .field(allowance);
        csv.end_row();
        std::ostringstream line;
        line << "steps=" << st << " residual " << format_double(r.residual)
             << " <= 3 stderr + allowance " << format_double(3.0 * r.residual_se + allowance);
        summary.check(r.residual <= 3.0 * r.residual_se + allowance, line.str());
        if (prev_ok) {
            std::ostringstream l2;
            l2 << "residual does not grow under step halving (" << format_double(prev_residual)
               << " -> " << format_double(r.residual) << ")";
            summary.check(r.residual <= std::max(prev_residual, 3.0 * r.residual_se + 1e-4),
                          l2.str());
        }
        prev_residual = r.residual;
        prev_ok = true;
    }
}

inline void run_trichotomy(const RunConfig& cfg, long long samples, std::uint64_t seed,
                           CsvWriter& csv, SummaryBuilder& summary) {
    const std::vector<double> horizons =
        cfg.get_list("experiment", "horizons", "0.5,1,1.5,2,2.5,3");
    const double mesh = cfg.get_double("experiment", "mesh", 0.125);
    Sphere2 sph(1.0);
    Torus tor(2, {1.0, 1.0});
    Hyperbolic2 hyp(-1.0);
    const std::vector<const Manifold*> models{&sph, &tor, &hyp};
    const auto fits = trichotomy_experiment(models, horizons, mesh, samples, seed);
    for (const TrichotomyFit& fit : fits) {
        for (const TrichotomyRow& row : fit.rows) {
            csv.field(row.model)
                .field(row.horizon)
                .field(row.log_mass)
                .field(row.se_log)
                .field(fit.fitted_slope)
                .field(fit.predicted_slope);
            csv.end_row();
        }
        std::ostringstream line;
        line << fit.model << " slope " << format_double(fit.fitted_slope) << " vs predicted "
             << format_double(fit.predicted_slope);
        if (fit.model == "torus")
            summary.check(std::abs(fit.fitted_slope - fit.predicted_slope) <= 0.03, line.str());
        else
            summary.check(std::abs(fit.fitted_slope - fit.predicted_slope) <=
                              0.15 * std::abs(fit.predicted_slope),
                          line.str());
    }
}

inline void run_heat_kernel_check(const RunConfig& cfg, const Manifold& m, std::uint64_t seed,
                                  CsvWriter& csv, SummaryBuilder& summary) {
    const double t = cfg.get_double("experiment", "time", 0.5);
    const int resolution = static_cast<int>(cfg.get_int("experiment", "resolution", 96));
    auto hk = make_heat_kernel(m);
    const ChartPoint x0 = default_start(m);

    auto emit = [&](const std::string& name, double value, double target, double tol) {
        const bool ok = std::abs(value - target) <= tol;
        csv.field(name).field(value).field(target).field(tol).field(ok ? 1 : 0);
        csv.end_row();
        summary.check(ok, name + ": " + format_double(value) + " vs " + format_double(target));
        return ok;
    };

    // symmetry on random pairs
    RngStream rng(seed, stream_tag::kTest, 0);
    double worst_sym = 0.0;
    for (int trial = 0; trial < 16; ++trial) {
        Vec a(m.dim()), b(m.dim());
        for (int i = 0; i < m.dim(); ++i) {
            a[i] = 0.6 * (2.0 * rng.uniform() - 1.0);
            b[i] = 0.6 * (2.0 * rng.uniform() - 1.0);
        }
        if (m.name() == "hyperbolic2") {
            a[1] = 1.0 + 0.4 * rng.uniform();
            b[1] = 1.0 + 0.4 * rng.uniform();
        }
        const ChartPoint xa{0, a}, xb{0, b};
        const double pab = hk->p(t, xa, xb);
        worst_sym = std::max(worst_sym, std::abs(pab - hk->p(t, xb, xa)) /
                                            std::max(1.0, std::abs(pab)));
    }
    emit("symmetry", worst_sym, 0.0, 1e-8);

    const bool compact = m.name() == "torus" || m.name() == "sphere2";
    const double radius = m.name() == "hyperbolic2" ? 6.0 + 2.0 * std::sqrt(t)
                                                    : 8.0 * std::sqrt(t) + 1.0;
    const QuadGrid grid = hk->quad_grid(compact ? resolution : 2 * resolution, x0, radius, t);
    double mass = 0.0;
    for (size_t i = 0; i < grid.points.size(); ++i)
        mass += grid.weights[i] * hk->p(t, x0, grid.points[i]);
    emit("mass", mass, 1.0, 1e-6 + grid.tail_bound);

    double conv = 0.0;
    const ChartPoint y = default_start(m);  // diagonal entry of the semigroup
    for (size_t i = 0; i < grid.points.size(); ++i)
        conv += grid.weights[i] * hk->p(0.5 * t, x0, grid.points[i]) *
                hk->p(0.5 * t, grid.points[i], y);
    emit("semigroup", conv, hk->p(t, x0, y), 1e-5);

    if (const auto* sph = dynamic_cast<const Sphere2*>(&m)) {
        for (int l = 1; l <= 3; ++l) {
            double acc = 0.0;
            for (size_t i = 0; i < grid.points.size(); ++i)
                acc += grid.weights[i] *
                       detail::legendre_p(l, std::cos(sph->distance(x0, grid.points[i]) /
                                                      sph->radius())) *
                       hk->p(t, x0, grid.points[i]);
            const double a2 = sph->radius() * sph->radius();
            emit("spectral_l" + std::to_string(l), acc,
                 std::exp(-0.5 * l * (l + 1) * t / a2), 1e-5);
        }
    }
}

inline void run_free_path(const RunConfig& cfg, const Manifold& m, long long samples,
                          std::uint64_t seed, CsvWriter& csv, SummaryBuilder& summary) {
    const double horizon = cfg.get_double("experiment", "horizon", 0.5);
    const std::string kind_s = cfg.get("experiment", "kind", "g1");
    const int segments = static_cast<int>(cfg.get_int("experiment", "segments", 8));
    const int steps = static_cast<int>(cfg.get_int("experiment", "steps", 32));

    // two atoms "x,y;x,y" and their weights
    const std::string atoms_s =
        cfg.get("experiment", "atoms",
                m.name() == "hyperbolic2" ? "0,1;0.4,1.3" : "0,0;0.4,-0.2");
    std::vector<ChartPoint> atoms;
    {
        std::istringstream ss(atoms_s);
        std::string part;
        while (std::getline(ss, part, ';')) {
            std::vector<double> coords;
            std::istringstream ps(part);
            std::string num;
            while (std::getline(ps, num, ',')) {
                try {
                    coords.push_back(std::stod(num));
                } catch (const std::exception&) {
                    throw ConfigError("[experiment] atoms: not a number: '" + num + "'");
                }
            }
            atoms.push_back(point_from_list(m, coords));
        }
    }
    if (atoms.size() != 2) throw ConfigError("[experiment] atoms: need exactly two points");
    const std::vector<double> weights = cfg.get_list("experiment", "weights", "0.5,0.5");
    if (weights.size() != 2) throw ConfigError("[experiment] weights: need two weights");

    const RadialBump bump = bump_from_config(cfg, m, default_center_string(m));
    std::vector<double> times = cfg.get_list("experiment", "times", format_double(horizon));
    const CylinderFunction F =
        cylinder_from_bumps(times, std::vector<RadialBump>(times.size(), bump));
    const PathFunctional func = [&F](const PiecewiseGeodesicPath& p) { return F.eval_path(p); };

    EstimatorResult ra, rb, mix;
    if (kind_s == "wiener") {
        ra = free_path_wiener(m, InitialDistribution::point(atoms[0]), func, horizon, steps,
                              samples, seed);
        rb = free_path_wiener(m, InitialDistribution::point(atoms[1]), func, horizon, steps,
                              samples, seed + 1);
        mix = free_path_wiener(m, InitialDistribution::mixture(atoms, weights), func, horizon,
                               steps, samples, seed + 2);
    } else if (kind_s == "g0" || kind_s == "g1") {
        const MetricKind kind = kind_s == "g1" ? MetricKind::G1 : MetricKind::G0;
        const FiniteDimMeasure mu = make_measure(kind, partition_uniform(horizon, segments),
                                                 m.dim());
        ra = free_path_estimate(m, InitialDistribution::point(atoms[0]), mu, func, samples, seed);
        rb = free_path_estimate(m, InitialDistribution::point(atoms[1]), mu, func, samples,
                                seed + 1);
        mix = free_path_estimate(m, InitialDistribution::mixture(atoms, weights), mu, func,
                                 samples, seed + 2);
    } else {
        throw ConfigError("[experiment] kind must be g0, g1 or wiener");
    }

    auto row = [&](const std::string& label, const EstimatorResult& r) {
        csv.field(label).field(r.mean).field(r.std_error).field(r.ess).field(r.samples).field(
            r.seed);
        csv.end_row();
    };
    row("atom_a", ra);
    row("atom_b", rb);
    row("mixture", mix);
    const double combo = weights[0] * ra.mean + weights[1] * rb.mean;
    const double combo_se = weights[0] * ra.std_error + weights[1] * rb.std_error;
    EstimatorResult comboR;
    comboR.mean = combo;
    comboR.std_error = combo_se;
    comboR.ess = 0;
    comboR.samples = 0;
    comboR.seed = seed;
    row("combination", comboR);
    std::ostringstream line;
    line << "mixture " << format_double(mix.mean) << " vs convex combination "
         << format_double(combo);
    summary.check(std::abs(mix.mean - combo) <= 3.0 * (mix.std_error + combo_se), line.str());
}

}  // namespace detail

/// Run an experiment: writes results.csv, manifest.json and summary.txt to
/// the output directory; the exit code encodes the tolerance verdicts.
inline RunOutcome run_experiment(const RunConfig& cfg) {
    const std::filesystem::path out_dir = cfg.get("run", "out", "runs/" + cfg.experiment);
    const long long samples = cfg.get_int("run", "samples", 0);
    const std::uint64_t seed = cfg.get_u64("run", "seed", 20240817);

    detail::SummaryBuilder summary;
    std::unique_ptr<CsvWriter> csv;

    std::filesystem::create_directories(out_dir);
    if (cfg.experiment == "simulate") {
        auto m = detail::manifold_from_config(cfg);
        csv = std::make_unique<CsvWriter>(
            std::vector<std::string>{"t", "mean_dist2", "stderr", "samples", "seed"});
        detail::run_simulate(cfg, *m, samples > 0 ? samples : 10000, seed, *csv, summary,
                             out_dir);
    } else if (cfg.experiment == "converge") {
        auto m = detail::manifold_from_config(cfg);
        csv = std::make_unique<CsvWriter>(
            std::vector<std::string>{"mesh", "mean", "stderr", "ess", "samples", "seed"});
        detail::run_converge(cfg, *m, samples > 0 ? samples : 4000, seed, *csv, summary);
    } else if (cfg.experiment == "ibp-check") {
        auto m = detail::manifold_from_config(cfg);
        csv = std::make_unique<CsvWriter>(std::vector<std::string>{
            "steps", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "residual", "residual_stderr",
            "allowance"});
        detail::run_ibp_check(cfg, *m, samples > 0 ? samples : 20000, seed, *csv, summary);
    } else if (cfg.experiment == "trichotomy") {
        csv = std::make_unique<CsvWriter>(std::vector<std::string>{
            "model", "horizon", "log_mass", "stderr", "fitted_slope", "predicted_slope"});
        detail::run_trichotomy(cfg, samples > 0 ? samples : 4000, seed, *csv, summary);
    } else if (cfg.experiment == "heat-kernel-check") {
        auto m = detail::manifold_from_config(cfg);
        csv = std::make_unique<CsvWriter>(
            std::vector<std::string>{"check", "value", "target", "tolerance", "pass"});
        detail::run_heat_kernel_check(cfg, *m, seed, *csv, summary);
    } else if (cfg.experiment == "free-path") {
        auto m = detail::manifold_from_config(cfg);
        csv = std::make_unique<CsvWriter>(
            std::vector<std::string>{"label", "mean", "stderr", "ess", "samples", "seed"});
        detail::run_free_path(cfg, *m, samples > 0 ? samples : 20000, seed, *csv, summary);
    } else {
        throw ConfigError("unknown experiment '" + cfg.experiment + "'");
    }

    write_text_file(out_dir / "results.csv", csv->str());
    write_text_file(out_dir / "manifest.json", cfg.to_manifest().dump(2) + "\n");
    const std::string verdict = summary.failed() ? "RESULT: FAIL\n" : "RESULT: PASS\n";
    write_text_file(out_dir / "summary.txt", summary.str() + verdict);

    RunOutcome out;
    out.summary = summary.str() + verdict;
    out.exit_code = summary.failed() ? 1 : 0;
    return out;
}

/// Re-run a prior experiment from its manifest; byte-identical results.csv
/// under the same library version (a version mismatch warns and proceeds).
inline RunOutcome replay_manifest(const std::filesystem::path& manifest_path,
                                  const std::string& out_override = "") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest: " + std::string(e.what()));
    }
    if (!j.contains("library_version") ||
        j["library_version"].get<std::string>() != PATHINT_VERSION)
        std::cerr << "warning: manifest version "
                  << (j.contains("library_version") ? j["library_version"].get<std::string>()
                                                    : std::string("<missing>"))
                  << " differs from library " << PATHINT_VERSION << "; proceeding\n";
    RunConfig cfg = RunConfig::from_manifest(j);
    if (!out_override.empty()) cfg.set("run", "out", out_override);
    return run_experiment(cfg);
}

}  // namespace pathint
