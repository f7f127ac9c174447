#include "causalmed/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "causalmed/rng.hpp"

namespace causalmed {

Scenario scenario_from_string(const std::string& name) {
    if (name == "all_correct") return Scenario::AllCorrect;
    if (name == "m0") return Scenario::M0Correct;
    if (name == "m1") return Scenario::M1Correct;
    if (name == "m2") return Scenario::M2Correct;
    if (name == "m3") return Scenario::M3Correct;
    if (name == "continuous_all") return Scenario::ContinuousAll;
    if (name == "discrete_all") return Scenario::DiscreteAll;
    throw std::invalid_argument("unknown scenario: " + name);
}

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::AllCorrect: return "all_correct";
        case Scenario::M0Correct: return "m0";
        case Scenario::M1Correct: return "m1";
        case Scenario::M2Correct: return "m2";
        case Scenario::M3Correct: return "m3";
        case Scenario::ContinuousAll: return "continuous_all";
        case Scenario::DiscreteAll: return "discrete_all";
    }
    throw std::logic_error("scenario_name");
}

double pow23(double x) {
    // sign(x) |x|^{2/3}: the odd reading of the 2/3 power, defined for
    // negative arguments.
    const double r = std::cbrt(std::fabs(x));
    const double v = r * r;
    return x < 0.0 ? -v : v;
}

Eigen::MatrixXd SemiLinearTruth::theta_mc() const {
    const Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(p, p) - b_mm.transpose();
    return ib.inverse() * b_mc.transpose();
}

Eigen::VectorXd SemiLinearTruth::theta_ma() const {
    const Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(p, p) - b_mm.transpose();
    return ib.inverse() * beta_ma;
}

Eigen::MatrixXd SemiLinearTruth::reduced_noise_cov() const {
    const Eigen::MatrixXd inv =
        (Eigen::MatrixXd::Identity(p, p) - b_mm.transpose()).inverse();
    return inv * sigma_m2.asDiagonal() * inv.transpose();
}

Dag SemiLinearTruth::mediator_dag() const {
    Adjacency adj(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (b_mm(i, j) != 0.0) adj.set(i, j, true);
    return Dag{adj};
}

SemiLinearTruth random_er_truth(int p, int t, std::uint64_t seed, bool hetero_noise) {
    if (p < 1 || t < 1) throw std::invalid_argument("random_er_truth: need p >= 1, t >= 1");
    Rng rng(derive_seed(seed, 0xE21ULL));
    SemiLinearTruth tr;
    tr.p = p;
    tr.t = t;
    tr.seed = seed;
    const int tc = t - 1;

    // Random topological order, then ER support above the diagonal of that order.
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    for (int i = p - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[rng.uniform_index(static_cast<std::size_t>(i) + 1)]);

    tr.b_mm = Eigen::MatrixXd::Zero(p, p);
    const double edge_prob =
        p > 1 ? std::min(1.0, static_cast<double>(p / 2) / static_cast<double>(p - 1)) : 0.0;
    for (int a = 0; a < p; ++a)
        for (int b = a + 1; b < p; ++b)
            if (rng.bernoulli(edge_prob)) tr.b_mm(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]) = rng.uniform(-1.0, 1.0);

    tr.b_mc.resize(tc, p);
    for (int i = 0; i < tc; ++i)
        for (int j = 0; j < p; ++j) tr.b_mc(i, j) = rng.uniform(-1.0, 1.0);
    tr.beta_ma.resize(p);
    for (int j = 0; j < p; ++j) tr.beta_ma(j) = rng.uniform(-1.0, 1.0);
    tr.beta_yc.resize(tc);
    for (int i = 0; i < tc; ++i) tr.beta_yc(i) = rng.uniform(-1.0, 1.0);
    tr.alpha_ya = rng.uniform(-1.0, 1.0);
    tr.beta_ym.resize(p);
    for (int j = 0; j < p; ++j) tr.beta_ym(j) = rng.uniform(-1.0, 1.0);
    tr.beta_ac.resize(tc);
    for (int i = 0; i < tc; ++i) tr.beta_ac(i) = rng.uniform(-1.0, 1.0);
    tr.sigma_m2 = Eigen::VectorXd::Ones(p);
    if (hetero_noise)
        for (int j = 0; j < p; ++j) tr.sigma_m2(j) = rng.uniform(0.5, 1.0);
    tr.sigma_y = 1.0;
    tr.target_j = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(p)));
    return tr;
}

namespace {

Eigen::VectorXd kang_schafer(const Eigen::VectorXd& z) {
    const int tc = static_cast<int>(z.size());
    Eigen::VectorXd c(tc);
    for (int k = 0; k < tc; ++k) {
        const int k1 = (k + 1) % tc;
        const int k2 = (k + 2) % tc;
        switch (k % 4) {
            case 0: c(k) = std::exp(z(k) / 2.0); break;
            case 1: c(k) = z(k) / (1.0 + std::exp(z(k1))) + 10.0; break;
            case 2: c(k) = std::pow(z(k) * z(k2) / 25.0 + 0.6, 3.0); break;
            default: c(k) = std::pow(z(k) + z(k1) + 20.0, 2.0); break;
        }
    }
    return c;
}

Link scenario_link(Scenario s) {
    return s == Scenario::M0Correct ? Link::Logit : Link::Probit;
}

// Mediator conditional mean under the scenario's (possibly distorted)
// generating equations: reduced-form mean plus coordinate-wise kinks.
// theta_c / theta_a are the precomputed reduced-form coefficient blocks.
Eigen::VectorXd scenario_med_mean(const SemiLinearTruth& tr, Scenario s,
                                  const Eigen::MatrixXd& theta_c,
                                  const Eigen::VectorXd& theta_a,
                                  const Eigen::VectorXd& z, double a) {
    Eigen::VectorXd lin = theta_a * a;
    if (tr.t > 1) lin += theta_c * z;
    switch (s) {
        case Scenario::M2Correct: {
            Eigen::VectorXd m = lin;
            for (int k = 0; k < tr.p; ++k)
                if (k != tr.target_j) m(k) = pow23(lin(k));
            return m;
        }
        case Scenario::M3Correct: {
            Eigen::VectorXd m = lin;
            m(tr.target_j) = lin(tr.target_j) - theta_a(tr.target_j) * a + 0.5 * theta_a(tr.target_j);
            return m;
        }
        default:
            return lin;
    }
}

}  // namespace

Dataset gen_scenario(const SemiLinearTruth& tr, Scenario scenario, int n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6e5ULL));
    const int tc = tr.t - 1;
    const int p = tr.p;
    const Eigen::MatrixXd linv =
        (Eigen::MatrixXd::Identity(p, p) - tr.b_mm.transpose()).inverse();
    const Eigen::MatrixXd theta_c = tr.theta_mc();
    const Eigen::VectorXd theta_a = tr.theta_ma();
    const Link link = scenario_link(scenario);

    Eigen::MatrixXd cmat(n, tc);
    Eigen::VectorXd avec(n);
    Eigen::MatrixXd mmat(n, p);
    Eigen::VectorXd yvec(n);

    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z(tc);
        for (int k = 0; k < tc; ++k) z(k) = rng.normal();

        const double eta_a = tc > 0 ? tr.beta_ac.dot(z) : 0.0;
        const double pa = link == Link::Probit ? normal_cdf(eta_a) : logistic_cdf(eta_a);
        const double a = rng.uniform() <= pa ? 1.0 : 0.0;

        Eigen::VectorXd eps(p);
        for (int k = 0; k < p; ++k) eps(k) = std::sqrt(tr.sigma_m2(k)) * rng.normal();
        const Eigen::VectorXd noise = linv * eps;

        Eigen::VectorXd m(p);
        if (scenario == Scenario::DiscreteAll) {
            for (int k = 0; k < p; ++k) {
                const double eta = (tc > 0 ? theta_c.row(k).dot(z) : 0.0) + theta_a(k) * a +
                                   noise(k);
                const double u = rng.uniform();
                m(k) = std::log(u / (1.0 - u)) <= eta ? 1.0 : 0.0;
            }
        } else {
            m = scenario_med_mean(tr, scenario, theta_c, theta_a, z, a) + noise;
        }

        const double eps_y = tr.sigma_y * rng.normal();
        double y;
        const double cy = tc > 0 ? tr.beta_yc.dot(z) : 0.0;
        switch (scenario) {
            case Scenario::M1Correct:
                y = pow23(cy + tr.alpha_ya * a + tr.beta_ym.dot(m)) + eps_y;
                break;
            case Scenario::ContinuousAll:
                y = cy + pow23(tr.alpha_ya * a + tr.beta_ym.dot(m)) + eps_y;
                break;
            case Scenario::DiscreteAll:
                y = cy + tr.alpha_ya * a + tr.beta_ym.dot(m) + a * (cy + tr.beta_ym.dot(m)) +
                    eps_y;
                break;
            default:
                y = cy + tr.alpha_ya * a + tr.beta_ym.dot(m) + eps_y;
                break;
        }

        cmat.row(i) = (scenario == Scenario::ContinuousAll && tc > 0)
                          ? kang_schafer(z).transpose()
                          : z.transpose();
        avec(i) = a;
        mmat.row(i) = m.transpose();
        yvec(i) = y;
    }
    return from_blocks(std::move(cmat), std::move(avec), std::move(mmat), std::move(yvec));
}

// ---------------------------------------------------------------------------
// Quadrature utilities
// ---------------------------------------------------------------------------

namespace {

// Probabilists' Gauss-Hermite rule: integrates f against the standard normal
// density. Nodes/weights from the Golub-Welsch tridiagonal.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    explicit GaussHermite(int n) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            const double b = std::sqrt(static_cast<double>(i));
            t(i, i - 1) = b;
            t(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        nodes = es.eigenvalues();
        weights.resize(n);
        for (int i = 0; i < n; ++i) {
            const double v = es.eigenvectors()(0, i);
            weights(i) = v * v;
        }
    }
};

// 16-point Gauss-Legendre on [-1, 1].
const double kGlNodes[16] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318, -0.7554044083550030,
    -0.6178762444026438, -0.4580167776572274, -0.2816035507792589, -0.0950125098376374,
    0.0950125098376374,  0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,  0.9894009349916499};
const double kGlWeights[16] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928, 0.1246289712555339,
    0.1495959888165767, 0.1691565193950025, 0.1826034150449236, 0.1894506104550685,
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};

double norm_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

// E[g(X)] for X ~ N(mean, sd^2), g = the 2/3 power. Panels are graded
// toward the kink at zero, where g's derivative is unbounded.
double expect_pow23(double mean, double sd, int level) {
    if (sd <= 0.0) return pow23(mean);
    const double lo = mean - 12.0 * sd, hi = mean + 12.0 * sd;
    const int panels = 24 * level;

    auto integrate_block = [&](double a, double b, bool grade_toward_a) {
        // Geometric grading toward the endpoint shared with the kink.
        double total = 0.0;
        for (int k = 0; k < panels; ++k) {
            const double f0 = std::pow(static_cast<double>(k) / panels, 3.0);
            const double f1 = std::pow(static_cast<double>(k + 1) / panels, 3.0);
            double x0, x1;
            if (grade_toward_a) {
                x0 = a + (b - a) * f0;
                x1 = a + (b - a) * f1;
            } else {
                x0 = b - (b - a) * f1;
                x1 = b - (b - a) * f0;
            }
            const double half = 0.5 * (x1 - x0), mid = 0.5 * (x0 + x1);
            double acc = 0.0;
            for (int q = 0; q < 16; ++q) {
                const double x = mid + half * kGlNodes[q];
                acc += kGlWeights[q] * pow23(x) * norm_pdf(x, mean, sd);
            }
            total += acc * half;
        }
        return total;
    };

    if (hi <= 0.0 || lo >= 0.0) {
        // Kink outside the mass; grade toward the nearer end anyway.
        return integrate_block(lo, hi, std::fabs(lo) < std::fabs(hi));
    }
    return integrate_block(0.0, hi, true) + integrate_block(lo, 0.0, false);
}

// ---------------------------------------------------------------------------
// Continuous-scenario truth engine
// ---------------------------------------------------------------------------

// Outcome decomposition mu*(z, a, m) = base(z, a) + h(lin0(z, a) + beta_h'm)
// with h either the identity or the 2/3 power.
struct OutcomeForm {
    bool h_identity = true;
    int level = 1;
    double alpha = 0.0;
    Eigen::VectorXd beta_yc;
    Eigen::VectorXd beta_h;
    Scenario scenario = Scenario::AllCorrect;

    double base(const Eigen::VectorXd& z, double a) const {
        const double cz = beta_yc.size() > 0 ? beta_yc.dot(z) : 0.0;
        switch (scenario) {
            case Scenario::M1Correct: return 0.0;
            case Scenario::ContinuousAll: return cz;
            default: return cz + alpha * a;
        }
    }
    double lin0(const Eigen::VectorXd& z, double a) const {
        const double cz = beta_yc.size() > 0 ? beta_yc.dot(z) : 0.0;
        switch (scenario) {
            case Scenario::M1Correct: return cz + alpha * a;
            case Scenario::ContinuousAll: return alpha * a;
            default: return 0.0;
        }
    }
    // E[h(mean + s)], s ~ N(0, var).
    double expect_h(double mean, double var) const {
        if (h_identity) return mean;
        return expect_pow23(mean, std::sqrt(std::max(var, 0.0)), level);
    }
};

struct ContinuousEngine {
    const SemiLinearTruth* tr;
    Scenario scenario;
    int level;
    OutcomeForm out;
    Eigen::MatrixXd v;  // reduced noise covariance
    Eigen::MatrixXd theta_c;
    Eigen::VectorXd theta_a;
    GaussHermite gh;

    ContinuousEngine(const SemiLinearTruth& truth, Scenario s, int lvl)
        : tr(&truth), scenario(s), level(lvl), gh(24 * lvl) {
        out.scenario = s;
        out.h_identity = !(s == Scenario::M1Correct || s == Scenario::ContinuousAll);
        out.level = lvl;
        out.alpha = truth.alpha_ya;
        out.beta_yc = truth.beta_yc;
        out.beta_h = truth.beta_ym;
        v = truth.reduced_noise_cov();
        theta_c = truth.theta_mc();
        theta_a = truth.theta_ma();
    }

    double e1_of(const Eigen::VectorXd& z) const {
        const double eta = tr->t > 1 ? tr->beta_ac.dot(z) : 0.0;
        return scenario_link(scenario) == Link::Probit ? normal_cdf(eta) : logistic_cdf(eta);
    }

    Eigen::VectorXd med_mean(const Eigen::VectorXd& z, double a) const {
        return scenario_med_mean(*tr, scenario, theta_c, theta_a, z, a);
    }

    // Tensor iteration over the latent-confounder grid.
    template <typename F>
    double outer(F&& f) const {
        const int tc = tr->t - 1;
        if (tc == 0) return f(Eigen::VectorXd());
        const int nq = static_cast<int>(gh.nodes.size());
        std::vector<int> idx(static_cast<std::size_t>(tc), 0);
        Eigen::VectorXd z(tc);
        double total = 0.0;
        while (true) {
            double w = 1.0;
            for (int k = 0; k < tc; ++k) {
                z(k) = gh.nodes(idx[static_cast<std::size_t>(k)]);
                w *= gh.weights(idx[static_cast<std::size_t>(k)]);
            }
            total += w * f(z);
            int k = 0;
            while (k < tc && ++idx[static_cast<std::size_t>(k)] == nq) {
                idx[static_cast<std::size_t>(k)] = 0;
                ++k;
            }
            if (k == tc) break;
        }
        return total;
    }

    // kappa(a', z) = E[Y | Z=z, A=a'].
    double kappa(const Eigen::VectorXd& z, double a) const {
        const Eigen::VectorXd mm = med_mean(z, a);
        const double mean = out.lin0(z, a) + out.beta_h.dot(mm);
        const double var = out.beta_h.dot(v * out.beta_h);
        return out.base(z, a) + out.expect_h(mean, var);
    }

    // zeta_j(a', 0, z): product law with m_j from arm a' and m_{-j} from arm
    // 0, outcome arm fixed at 1. The index beta_h'M is then a 1-d normal
    // whose variance adds the independent j / minus-j blocks.
    double zeta(int j, const Eigen::VectorXd& z, double a_prime) const {
        const Eigen::VectorXd m_ap = med_mean(z, a_prime);
        const Eigen::VectorXd m_0 = med_mean(z, 0.0);
        double mean = out.lin0(z, 1.0) + out.beta_h(j) * m_ap(j);
        double var = out.beta_h(j) * out.beta_h(j) * v(j, j);
        for (int k = 0; k < tr->p; ++k) {
            if (k == j) continue;
            mean += out.beta_h(k) * m_0(k);
            for (int l = 0; l < tr->p; ++l)
                if (l != j) var += out.beta_h(k) * v(k, l) * out.beta_h(l);
        }
        return out.base(z, 1.0) + out.expect_h(mean, var);
    }

    // varrho_j(a', m_j, z; Pa) marginalized over m_j ~ N(mjmean, mjvar):
    // every conditional is Gaussian, so the integrals compose into a single
    // 1-d h-expectation with inflated variance.
    double rho_integrated(int j, const std::vector<int>& pa, const Eigen::VectorXd& z,
                          double a_prime, double mj_mean, double mj_var) const {
        const int p = tr->p;
        std::vector<int> s;  // conditioning coords: j then parents
        s.push_back(j);
        for (int q : pa) s.push_back(q);
        std::vector<int> r;  // remaining coords
        for (int k = 0; k < p; ++k)
            if (std::find(s.begin(), s.end(), k) == s.end()) r.push_back(k);

        const Eigen::VectorXd mm = med_mean(z, a_prime);

        // beta_h' M given M_S = s: mean = c0 + lambda_S' m_S, var = vr.
        Eigen::VectorXd beta_s(static_cast<Eigen::Index>(s.size()));
        for (std::size_t k = 0; k < s.size(); ++k) beta_s(static_cast<Eigen::Index>(k)) = out.beta_h(s[k]);
        double vr = 0.0;
        Eigen::VectorXd lambda = beta_s;
        double c0 = out.lin0(z, a_prime);
        if (!r.empty()) {
            Eigen::MatrixXd vss(s.size(), s.size()), vrs(r.size(), s.size()), vrr(r.size(), r.size());
            for (std::size_t x = 0; x < s.size(); ++x)
                for (std::size_t yq = 0; yq < s.size(); ++yq) vss(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = v(s[x], s[yq]);
            for (std::size_t x = 0; x < r.size(); ++x) {
                for (std::size_t yq = 0; yq < s.size(); ++yq) vrs(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = v(r[x], s[yq]);
                for (std::size_t yq = 0; yq < r.size(); ++yq) vrr(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = v(r[x], r[yq]);
            }
            Eigen::VectorXd beta_r(static_cast<Eigen::Index>(r.size()));
            for (std::size_t k = 0; k < r.size(); ++k) beta_r(static_cast<Eigen::Index>(k)) = out.beta_h(r[k]);
            const Eigen::MatrixXd gain = vrs * vss.inverse();  // regression of R on S
            const Eigen::MatrixXd vcond = vrr - gain * vrs.transpose();
            vr = beta_r.dot(vcond * beta_r);
            lambda += gain.transpose() * beta_r;
            Eigen::VectorXd mr(static_cast<Eigen::Index>(r.size()));
            for (std::size_t k = 0; k < r.size(); ++k) mr(static_cast<Eigen::Index>(k)) = mm(r[k]);
            Eigen::VectorXd ms(static_cast<Eigen::Index>(s.size()));
            for (std::size_t k = 0; k < s.size(); ++k) ms(static_cast<Eigen::Index>(k)) = mm(s[k]);
            c0 += beta_r.dot(mr) - (gain.transpose() * beta_r).dot(ms);
        }

        // Integrate parents over their marginal law N(mm_P, V_PP) and m_j
        // over N(mj_mean, mj_var): the affine mean soaks up the shifts, the
        // variance inflates by the quadratic forms.
        double mean = c0 + lambda(0) * mj_mean;
        double var = vr + lambda(0) * lambda(0) * mj_var;
        if (!pa.empty()) {
            Eigen::VectorXd lam_p = lambda.tail(static_cast<Eigen::Index>(pa.size()));
            Eigen::MatrixXd vpp(pa.size(), pa.size());
            for (std::size_t x = 0; x < pa.size(); ++x)
                for (std::size_t yq = 0; yq < pa.size(); ++yq) vpp(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = v(pa[x], pa[yq]);
            Eigen::VectorXd mp(static_cast<Eigen::Index>(pa.size()));
            for (std::size_t k = 0; k < pa.size(); ++k) mp(static_cast<Eigen::Index>(k)) = mm(pa[k]);
            mean += lam_p.dot(mp);
            var += lam_p.dot(vpp * lam_p);
        }
        return out.base(z, a_prime) + out.expect_h(mean, var);
    }

    double dm(int j) const {
        return outer([&](const Eigen::VectorXd& z) { return zeta(j, z, 1.0) - zeta(j, z, 0.0); });
    }

    double tm(int j, const std::vector<int>& pa) const {
        return outer([&](const Eigen::VectorXd& z) {
            const double e1 = e1_of(z);
            const double e0 = 1.0 - e1;
            const double kdiff = kappa(z, 1.0) - kappa(z, 0.0);
            double acc = 0.0;
            for (int arm = 0; arm <= 1; ++arm) {
                const double w = arm == 1 ? e1 : e0;
                const Eigen::VectorXd mm = med_mean(z, static_cast<double>(arm));
                const double r1 = rho_integrated(j, pa, z, 1.0, mm(j), v(j, j));
                const double r0 = rho_integrated(j, pa, z, 0.0, mm(j), v(j, j));
                acc += w * (kdiff - (r1 - r0));
            }
            return acc;
        });
    }

    double de() const {
        return outer([&](const Eigen::VectorXd& z) {
            const Eigen::VectorXd m0 = med_mean(z, 0.0);
            const double var = out.beta_h.dot(v * out.beta_h);
            const double y1 = out.base(z, 1.0) +
                              out.expect_h(out.lin0(z, 1.0) + out.beta_h.dot(m0), var);
            const double y0 = out.base(z, 0.0) +
                              out.expect_h(out.lin0(z, 0.0) + out.beta_h.dot(m0), var);
            return y1 - y0;
        });
    }

    double ie() const {
        return outer([&](const Eigen::VectorXd& z) {
            const Eigen::VectorXd m0 = med_mean(z, 0.0);
            const Eigen::VectorXd m1 = med_mean(z, 1.0);
            const double var = out.beta_h.dot(v * out.beta_h);
            const double y1 = out.base(z, 0.0) +
                              out.expect_h(out.lin0(z, 0.0) + out.beta_h.dot(m1), var);
            const double y0 = out.base(z, 0.0) +
                              out.expect_h(out.lin0(z, 0.0) + out.beta_h.dot(m0), var);
            return y1 - y0;
        });
    }

    double te() const {
        return outer([&](const Eigen::VectorXd& z) {
            const Eigen::VectorXd m0 = med_mean(z, 0.0);
            const Eigen::VectorXd m1 = med_mean(z, 1.0);
            const double var = out.beta_h.dot(v * out.beta_h);
            const double y1 = out.base(z, 1.0) +
                              out.expect_h(out.lin0(z, 1.0) + out.beta_h.dot(m1), var);
            const double y0 = out.base(z, 0.0) +
                              out.expect_h(out.lin0(z, 0.0) + out.beta_h.dot(m0), var);
            return y1 - y0;
        });
    }
};

// ---------------------------------------------------------------------------
// Discrete-scenario truth engine
// ---------------------------------------------------------------------------

struct DiscreteEngine {
    const SemiLinearTruth* tr;
    int level;
    GaussHermite gh_outer;
    GaussHermite gh_latent;
    Eigen::MatrixXd linv;
    Eigen::MatrixXd theta_c;
    Eigen::VectorXd theta_a;

    DiscreteEngine(const SemiLinearTruth& truth, int lvl)
        : tr(&truth), level(lvl), gh_outer(16 * lvl), gh_latent(12 * lvl),
          linv((Eigen::MatrixXd::Identity(truth.p, truth.p) - truth.b_mm.transpose()).inverse()),
          theta_c(truth.theta_mc()), theta_a(truth.theta_ma()) {}

    double e1_of(const Eigen::VectorXd& z) const {
        const double eta = tr->t > 1 ? tr->beta_ac.dot(z) : 0.0;
        return normal_cdf(eta);
    }

    // Joint mass table over {0,1}^p given (z, a): latent correlated Gaussian
    // plus independent logistic thresholds.
    std::vector<double> joint_table(const Eigen::VectorXd& z, double a) const {
        const int p = tr->p;
        const Eigen::VectorXd eta = scenario_med_mean(*tr, Scenario::AllCorrect, theta_c, theta_a, z, a);
        const int patterns = 1 << p;
        std::vector<double> table(static_cast<std::size_t>(patterns), 0.0);
        const int nq = static_cast<int>(gh_latent.nodes.size());
        std::vector<int> idx(static_cast<std::size_t>(p), 0);
        Eigen::VectorXd eps(p);
        while (true) {
            double w = 1.0;
            for (int k = 0; k < p; ++k) {
                eps(k) = gh_latent.nodes(idx[static_cast<std::size_t>(k)]) * std::sqrt(tr->sigma_m2(k));
                w *= gh_latent.weights(idx[static_cast<std::size_t>(k)]);
            }
            const Eigen::VectorXd g = linv * eps;
            for (int mask = 0; mask < patterns; ++mask) {
                double prob = 1.0;
                for (int k = 0; k < p; ++k) {
                    const double pk = logistic_cdf(eta(k) + g(k));
                    prob *= (mask >> k) & 1 ? pk : 1.0 - pk;
                }
                table[static_cast<std::size_t>(mask)] += w * prob;
            }
            int k = 0;
            while (k < p && ++idx[static_cast<std::size_t>(k)] == nq) {
                idx[static_cast<std::size_t>(k)] = 0;
                ++k;
            }
            if (k == p) break;
        }
        return table;
    }

    double mu_star(const Eigen::VectorXd& z, double a, int mask) const {
        const double cz = tr->t > 1 ? tr->beta_yc.dot(z) : 0.0;
        double bm = 0.0;
        for (int k = 0; k < tr->p; ++k)
            if ((mask >> k) & 1) bm += tr->beta_ym(k);
        return cz + tr->alpha_ya * a + bm + a * (cz + bm);
    }

    template <typename F>
    double outer(F&& f) const {
        const int tc = tr->t - 1;
        if (tc == 0) return f(Eigen::VectorXd());
        const int nq = static_cast<int>(gh_outer.nodes.size());
        std::vector<int> idx(static_cast<std::size_t>(tc), 0);
        Eigen::VectorXd z(tc);
        double total = 0.0;
        while (true) {
            double w = 1.0;
            for (int k = 0; k < tc; ++k) {
                z(k) = gh_outer.nodes(idx[static_cast<std::size_t>(k)]);
                w *= gh_outer.weights(idx[static_cast<std::size_t>(k)]);
            }
            total += w * f(z);
            int k = 0;
            while (k < tc && ++idx[static_cast<std::size_t>(k)] == nq) {
                idx[static_cast<std::size_t>(k)] = 0;
                ++k;
            }
            if (k == tc) break;
        }
        return total;
    }

    double dm(int j) const {
        const int p = tr->p;
        const int patterns = 1 << p;
        return outer([&](const Eigen::VectorXd& z) {
            const auto t0 = joint_table(z, 0.0);
            const auto t1 = joint_table(z, 1.0);
            // Marginals of coordinate j and of the complement.
            double fj1 = 0.0, fj0 = 0.0;
            std::vector<double> frest0(static_cast<std::size_t>(patterns >> 1), 0.0);
            for (int mask = 0; mask < patterns; ++mask) {
                if ((mask >> j) & 1) {
                    fj1 += t1[static_cast<std::size_t>(mask)];
                    fj0 += t0[static_cast<std::size_t>(mask)];
                }
                int rest = 0, bit = 0;
                for (int k = 0; k < p; ++k) {
                    if (k == j) continue;
                    rest |= ((mask >> k) & 1) << bit;
                    ++bit;
                }
                frest0[static_cast<std::size_t>(rest)] += t0[static_cast<std::size_t>(mask)];
            }
            double acc = 0.0;
            for (int mask = 0; mask < patterns; ++mask) {
                int rest = 0, bit = 0;
                for (int k = 0; k < p; ++k) {
                    if (k == j) continue;
                    rest |= ((mask >> k) & 1) << bit;
                    ++bit;
                }
                const double fj_diff =
                    (mask >> j) & 1 ? fj1 - fj0 : (1.0 - fj1) - (1.0 - fj0);
                acc += mu_star(z, 1.0, mask) * frest0[static_cast<std::size_t>(rest)] * fj_diff;
            }
            return acc;
        });
    }

    double tm(int j, const std::vector<int>& pa) const {
        const int p = tr->p;
        const int patterns = 1 << p;
        return outer([&](const Eigen::VectorXd& z) {
            const auto t0 = joint_table(z, 0.0);
            const auto t1 = joint_table(z, 1.0);
            const double e1 = e1_of(z);
            const double e0 = 1.0 - e1;

            auto kappa = [&](double a) {
                const auto& t = a == 1.0 ? t1 : t0;
                double acc = 0.0;
                for (int mask = 0; mask < patterns; ++mask)
                    acc += mu_star(z, a, mask) * t[static_cast<std::size_t>(mask)];
                return acc;
            };

            // varrho_j(a', m_j, z) = sum_pa mu2(z, a', pa, m_j) P(Pa=pa | z, a')
            // with mu2 the conditional outcome mean given (Pa, M_j).
            auto rho = [&](double ap, int mjval) {
                const auto& t = ap == 1.0 ? t1 : t0;
                double acc = 0.0;
                const int npa = static_cast<int>(pa.size());
                for (int pmask = 0; pmask < (1 << npa); ++pmask) {
                    // P(Pa = pmask | z, a') and conditional mean of mu* given
                    // (Pa = pmask, M_j = mjval).
                    double ppa = 0.0, psel = 0.0, musum = 0.0;
                    for (int mask = 0; mask < patterns; ++mask) {
                        bool match_pa = true;
                        for (int b = 0; b < npa; ++b)
                            if ((((mask >> pa[static_cast<std::size_t>(b)]) & 1)) != ((pmask >> b) & 1)) {
                                match_pa = false;
                                break;
                            }
                        if (!match_pa) continue;
                        ppa += t[static_cast<std::size_t>(mask)];
                        if (((mask >> j) & 1) == mjval) {
                            psel += t[static_cast<std::size_t>(mask)];
                            musum += mu_star(z, ap, mask) * t[static_cast<std::size_t>(mask)];
                        }
                    }
                    if (ppa <= 0.0 || psel <= 0.0) continue;
                    acc += (musum / psel) * ppa;
                }
                return acc;
            };

            const double kdiff = kappa(1.0) - kappa(0.0);
            // Marginal of M_j mixes the two arms with the propensity.
            double fj1_arm1 = 0.0, fj1_arm0 = 0.0;
            for (int mask = 0; mask < patterns; ++mask)
                if ((mask >> j) & 1) {
                    fj1_arm1 += t1[static_cast<std::size_t>(mask)];
                    fj1_arm0 += t0[static_cast<std::size_t>(mask)];
                }
            const double pj1 = e0 * fj1_arm0 + e1 * fj1_arm1;
            double acc = 0.0;
            for (int mjval = 0; mjval <= 1; ++mjval) {
                const double w = mjval == 1 ? pj1 : 1.0 - pj1;
                acc += w * (kdiff - (rho(1.0, mjval) - rho(0.0, mjval)));
            }
            return acc;
        });
    }

    double de() const {
        const int patterns = 1 << tr->p;
        return outer([&](const Eigen::VectorXd& z) {
            const auto t0 = joint_table(z, 0.0);
            double acc = 0.0;
            for (int mask = 0; mask < patterns; ++mask)
                acc += (mu_star(z, 1.0, mask) - mu_star(z, 0.0, mask)) * t0[static_cast<std::size_t>(mask)];
            return acc;
        });
    }

    double ie() const {
        const int patterns = 1 << tr->p;
        return outer([&](const Eigen::VectorXd& z) {
            const auto t0 = joint_table(z, 0.0);
            const auto t1 = joint_table(z, 1.0);
            double acc = 0.0;
            for (int mask = 0; mask < patterns; ++mask)
                acc += mu_star(z, 0.0, mask) *
                       (t1[static_cast<std::size_t>(mask)] - t0[static_cast<std::size_t>(mask)]);
            return acc;
        });
    }

    double te() const {
        const int patterns = 1 << tr->p;
        return outer([&](const Eigen::VectorXd& z) {
            const auto t0 = joint_table(z, 0.0);
            const auto t1 = joint_table(z, 1.0);
            double acc = 0.0;
            for (int mask = 0; mask < patterns; ++mask)
                acc += mu_star(z, 1.0, mask) * t1[static_cast<std::size_t>(mask)] -
                       mu_star(z, 0.0, mask) * t0[static_cast<std::size_t>(mask)];
            return acc;
        });
    }
};

TrueEffects effects_at_level(const SemiLinearTruth& truth, Scenario scenario, int j, int level) {
    TrueEffects out;
    const auto mec = enumerate_mec(cpdag_of_dag(truth.mediator_dag()));
    if (scenario == Scenario::DiscreteAll) {
        DiscreteEngine eng(truth, level);
        out.dm = eng.dm(j);
        double tm_acc = 0.0;
        for (const auto& g : mec) tm_acc += eng.tm(j, parents_of(g, j));
        out.tm_avg = tm_acc / static_cast<double>(mec.size());
        out.de = eng.de();
        out.ie = eng.ie();
        out.te = eng.te();
    } else {
        ContinuousEngine eng(truth, scenario, level);
        out.dm = eng.dm(j);
        double tm_acc = 0.0;
        for (const auto& g : mec) tm_acc += eng.tm(j, parents_of(g, j));
        out.tm_avg = tm_acc / static_cast<double>(mec.size());
        out.de = eng.de();
        out.ie = eng.ie();
        out.te = eng.te();
    }
    out.im_avg = out.tm_avg - out.dm;
    return out;
}

}  // namespace

TrueEffects true_effects(const SemiLinearTruth& truth, Scenario scenario, int j, int level) {
    TrueEffects lo = effects_at_level(truth, scenario, j, level);
    TrueEffects hi = effects_at_level(truth, scenario, j, level + 1);
    hi.quad_error = std::max({std::fabs(hi.dm - lo.dm), std::fabs(hi.tm_avg - lo.tm_avg),
                              std::fabs(hi.te - lo.te)});
    return hi;
}

double true_tm_single(const SemiLinearTruth& truth, Scenario scenario, int j, const Dag& g,
                      int level) {
    if (scenario == Scenario::DiscreteAll) {
        DiscreteEngine eng(truth, level);
        return eng.tm(j, parents_of(g, j));
    }
    ContinuousEngine eng(truth, scenario, level);
    return eng.tm(j, parents_of(g, j));
}

ClosedFormEffects closed_form_effects(const SemiLinearTruth& truth, int j) {
    ClosedFormEffects out;
    const Eigen::VectorXd theta = truth.theta_ma();
    out.dm = truth.beta_ym(j) * theta(j);
    out.de = truth.alpha_ya;
    out.ie = truth.beta_ym.dot(theta);
    out.te = out.de + out.ie;

    const int p = truth.p;
    std::vector<int> rest;
    for (int k = 0; k < p; ++k)
        if (k != j) rest.push_back(k);
    Eigen::MatrixXd b_sub(rest.size(), rest.size());
    Eigen::VectorXd beta_ma_sub(static_cast<Eigen::Index>(rest.size()));
    Eigen::VectorXd beta_ym_sub(static_cast<Eigen::Index>(rest.size()));
    for (std::size_t x = 0; x < rest.size(); ++x) {
        beta_ma_sub(static_cast<Eigen::Index>(x)) = truth.beta_ma(rest[x]);
        beta_ym_sub(static_cast<Eigen::Index>(x)) = truth.beta_ym(rest[x]);
        for (std::size_t yq = 0; yq < rest.size(); ++yq)
            b_sub(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(yq)) = truth.b_mm(rest[x], rest[yq]);
    }
    Eigen::VectorXd theta_sub;
    if (rest.empty()) {
        out.tm_true_dag = truth.beta_ym.dot(theta);
    } else {
        const Eigen::MatrixXd ib =
            Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rest.size()),
                                      static_cast<Eigen::Index>(rest.size())) -
            b_sub.transpose();
        theta_sub = ib.inverse() * beta_ma_sub;
        out.tm_true_dag = truth.beta_ym.dot(theta) - beta_ym_sub.dot(theta_sub);
    }
    out.im_true_dag = out.tm_true_dag - out.dm;
    return out;
}

}  // namespace causalmed
