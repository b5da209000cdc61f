#include "spillover/oracle.hpp"

#include <bit>
#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "spillover/errors.hpp"

namespace spillover {

namespace {

void check_cap(const ClusteredNetwork& net, int cap) {
    for (int k = 0; k < net.cluster_count(); ++k)
        if (net.cluster(k).size > cap)
            throw ClusterTooLargeForOracle("cluster " + std::to_string(k) + " has " +
                                           std::to_string(net.cluster(k).size) +
                                           " units; enumeration capped at " + std::to_string(cap));
}

Eigen::VectorXd mask_to_vector(std::uint32_t mask, int n) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = (mask >> i) & 1u ? 1.0 : 0.0;
    return z;
}

}  // namespace

Eigen::VectorXd evaluate_cluster(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                                 int k, const Eigen::VectorXd& z_k) {
    const Cluster& c = net.cluster(k);
    const int n = c.size;
    if (z_k.size() != n) throw LengthMismatch("assignment length does not match cluster size");
    if (model.kind == OutcomeModelKind::custom) {
        if (!model.custom_eval) throw BadParam("custom model without evaluator");
        return model.custom_eval(k, z_k);
    }
    const int off = net.unit_offset(k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const int g = off + i;
        double t = 0.0, u = 0.0;
        for (int h : c.in_adj[i]) {
            t += z_k[h];
            u += z_k[h] * model.X[off + h];
        }
        if (model.symmetric_exposure)
            for (int h : c.out_adj[i]) {
                bool dup = false;
                for (int h2 : c.in_adj[i]) dup = dup || h2 == h;
                if (dup) continue;
                t += z_k[h];
                u += z_k[h] * model.X[off + h];
            }
        switch (model.kind) {
            case OutcomeModelKind::model1:
                y[i] = model.zetas(g, 0) + model.zetas(g, 1) * z_k[i] + model.zetas(g, 2) * t;
                break;
            case OutcomeModelKind::model2:
                y[i] = model.zetas(g, 0) + model.zetas(g, 1) * z_k[i] + model.zetas(g, 2) * t +
                       model.zetas(g, 3) * t * z_k[i];
                break;
            case OutcomeModelKind::model3:
                y[i] = model.zetas(g, 0) + model.zetas(g, 1) * model.X[g] +
                       model.zetas(g, 2) * z_k[i] + model.zetas(g, 3) * z_k[i] * model.X[g] +
                       model.zetas(g, 4) * t + model.zetas(g, 5) * u;
                break;
            default:
                break;
        }
        y[i] += model.eps[g];
    }
    return y;
}

ThetaMap theta_map(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                   const AssignmentDesign& alpha) {
    if (model.kind == OutcomeModelKind::custom)
        throw BadParam("custom models must supply their own theta map");
    // Edge lookup and per-unit pieces are frozen into the closure.
    auto edges = std::make_shared<std::vector<Eigen::MatrixXi>>();
    edges->reserve(net.cluster_count());
    for (int k = 0; k < net.cluster_count(); ++k) {
        const Cluster& c = net.cluster(k);
        Eigen::MatrixXi m = Eigen::MatrixXi::Zero(c.size, c.size);
        for (auto [src, dst] : c.edges) {
            m(dst, src) = 1;  // m(i, j): j's treatment reaches i
            if (model.symmetric_exposure) m(src, dst) = 1;
        }
        edges->push_back(std::move(m));
    }
    auto offsets = std::make_shared<std::vector<int>>();
    auto own_prob = std::make_shared<std::vector<double>>();
    for (int k = 0; k < net.cluster_count(); ++k) {
        offsets->push_back(net.unit_offset(k));
        own_prob->push_back(alpha.marginal_treated_prob(k, net.cluster(k).size));
    }
    const OutcomeModelKind kind = model.kind;
    const Eigen::MatrixXd zetas = model.zetas;
    return [edges, offsets, own_prob, kind, zetas](int k, int i, int j) -> std::pair<double, double> {
        if ((*edges)[k](i, j) == 0) return {0.0, 0.0};
        const int g = (*offsets)[k] + i;
        switch (kind) {
            case OutcomeModelKind::model1:
                return {zetas(g, 2), 0.0};
            case OutcomeModelKind::model2:
                // Flipping a sender moves the interaction term through the
                // receiver's own treatment, which averages to its marginal.
                return {zetas(g, 2) + zetas(g, 3) * (*own_prob)[k], 0.0};
            case OutcomeModelKind::model3:
                return {zetas(g, 4), zetas(g, 5)};
            default:
                return {0.0, 0.0};
        }
    };
}

ApoTable exact_apo(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                   const AssignmentDesign& alpha, int cap) {
    check_cap(net, cap);
    ApoTable table;
    table.apo.resize(net.cluster_count());
    for (int k = 0; k < net.cluster_count(); ++k) {
        const int n = net.cluster(k).size;
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, 2 * n);
        const std::uint32_t total = 1u << n;
        for (std::uint32_t mask = 0; mask < total; ++mask) {
            const Eigen::VectorXd z = mask_to_vector(mask, n);
            const Eigen::VectorXd y = evaluate_cluster(model, net, k, z);
            const int treated = std::popcount(mask);
            for (int j = 0; j < n; ++j) {
                const int zj = (mask >> j) & 1u;
                const double pa =
                    std::exp(alpha.log_prob_excluding_counts(k, n, treated - zj));
                if (pa == 0.0) continue;
                for (int i = 0; i < n; ++i)
                    if (i != j) acc(i, 2 * j + zj) += pa * y[i];
            }
        }
        table.apo[k] = std::move(acc);
    }
    return table;
}

double exact_estimand(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                      const EstimandWeights& w, const AssignmentDesign& alpha,
                      std::optional<double> x, int cap) {
    const ApoTable apo = exact_apo(model, net, alpha, cap);
    if (!x.has_value()) {
        double tau = 0.0;
        for (int k = 0; k < w.cluster_count(); ++k)
            for (const auto& e : w.cluster_entries(k))
                tau += e.w * apo.pairwise_effect(k, e.receiver, e.sender);
        return tau;
    }
    double num = 0.0, den = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            if (model.X[off + e.sender] != *x) continue;
            num += e.w * apo.pairwise_effect(k, e.receiver, e.sender);
            den += e.w;
        }
    }
    if (den <= 0.0)
        throw EmptyConditional("no positive-weight sender with covariate value " +
                               std::to_string(*x));
    return w.s_n() * num / den;
}

ExactMoments exact_moments(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                           const EstimandWeights& w, const AssignmentDesign& alpha,
                           const AssignmentDesign& beta, Mode mode, Formulation f, int cap,
                           double w_perturb_treated) {
    check_cap(net, cap);
    const Eigen::VectorXd* X = mode == Mode::cse ? &model.X : nullptr;
    const DesignContext ctx = make_design_context(mode, f, w, X);
    const int dim = mode == Mode::ase ? 2 : 4;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < net.cluster_count(); ++k) {
        const int n = net.cluster(k).size;
        const std::uint32_t total = 1u << n;
        Eigen::VectorXd wts(n);
        for (std::uint32_t mask = 0; mask < total; ++mask) {
            const int treated = std::popcount(mask);
            const double log_pb = beta.log_prob_cluster_counts(k, n, treated);
            if (log_pb == -std::numeric_limits<double>::infinity()) continue;
            const double pb = std::exp(log_pb);
            for (int j = 0; j < n; ++j) {
                const int zj = (mask >> j) & 1u;
                double wj =
                    std::exp(alpha.log_prob_excluding_counts(k, n, treated - zj) - log_pb);
                if (zj && 2 * treated > n) wj *= w_perturb_treated;
                wts[j] = wj;
            }
            const Eigen::VectorXd z = mask_to_vector(mask, n);
            const Eigen::VectorXd y = evaluate_cluster(model, net, k, z);
            accumulate_cluster_moments(ctx, w, k, z, y, wts, pb, a, b);
        }
    }
    ExactMoments m;
    m.a = Eigen::MatrixXd(a.selfadjointView<Eigen::Upper>());
    m.b = b;
    WlsStats st;
    st.mode = mode;
    st.formulation = f;
    st.dim = dim;
    st.a = m.a;
    st.bvec = b;
    m.beta_r = solve(st);
    return m;
}

Eigen::VectorXd beta_r_closed_form(const PotentialOutcomeModel& model,
                                   const ClusteredNetwork& net, const EstimandWeights& w,
                                   const AssignmentDesign& alpha, Mode mode, Formulation f,
                                   int cap) {
    const ApoTable apo = exact_apo(model, net, alpha, cap);
    double sw = 0.0, s_sum = 0.0, s_dif = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k)
        for (const auto& e : w.cluster_entries(k)) {
            const double y1 = apo.value(k, e.receiver, e.sender, 1);
            const double y0 = apo.value(k, e.receiver, e.sender, 0);
            sw += e.w;
            s_sum += e.w * (y1 + y0);
            s_dif += e.w * (y1 - y0);
        }
    if (mode == Mode::ase) {
        Eigen::VectorXd beta(2);
        beta << (s_sum - s_dif) / (2.0 * sw), s_dif / sw;  // control mean, contrast
        return beta;
    }
    const DesignContext ctx = make_design_context(mode, f, w, &model.X);
    double sa_sum = 0.0, sa_dif = 0.0, sa2 = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            const double y1 = apo.value(k, e.receiver, e.sender, 1);
            const double y0 = apo.value(k, e.receiver, e.sender, 0);
            const double a_val = f == Formulation::receiver ? ctx.x_dagger[off + e.receiver]
                                                            : ctx.x_tilde[off + e.sender];
            sa_sum += e.w * a_val * (y1 + y0);
            sa_dif += e.w * a_val * (y1 - y0);
            sa2 += e.w * a_val * a_val;
        }
    }
    Eigen::VectorXd beta(4);
    if (f == Formulation::receiver) {
        beta << (s_sum - s_dif) / (2.0 * sw), (sa_sum - sa_dif) / (2.0 * sa2), s_dif / sw,
            sa_dif / sa2;
    } else {
        beta << s_sum / (2.0 * sw), sa_sum / (2.0 * sa2), s_dif / sw, sa_dif / sa2;
    }
    return beta;
}

double residual_moment_check(const PotentialOutcomeModel& model, const ClusteredNetwork& net,
                             const EstimandWeights& w, const AssignmentDesign& alpha,
                             const AssignmentDesign& beta, Mode mode, Formulation f, int cap,
                             double w_perturb_treated) {
    const ExactMoments m =
        exact_moments(model, net, w, alpha, beta, mode, f, cap, w_perturb_treated);
    const Eigen::VectorXd closed = beta_r_closed_form(model, net, w, alpha, mode, f, cap);
    return (m.b - m.a * closed).cwiseAbs().maxCoeff();
}

PopulationQuantities population_quantities(const ThetaMap& theta, const EstimandWeights& w,
                                           const Eigen::VectorXd& X) {
    const DemeanedCovariates dm = demeaned_covariates(w, X);
    const double total = w.entry_sum();
    PopulationQuantities q;
    double num3 = 0.0, num4 = 0.0, den4 = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            const auto [t3, t4] = theta(k, e.receiver, e.sender);
            const double xt = dm.x_tilde[off + e.sender];
            num3 += e.w * (t3 + t4 * dm.x_bar);
            num4 += e.w * xt * xt * t4;
            den4 += e.w * xt * xt;
        }
    }
    q.beta_p3 = num3 / total;
    q.beta_p4_ds = num4 / den4;

    // Receiver variant: theta4 aggregated per receiver by the conditional
    // weights, then averaged with squared aggregated-covariate weights.
    const Decomposition& dec = w.decomposition();
    const Eigen::VectorXd xd = aggregated_covariate(w, X);
    const double scale = w.rescaled() ? 1.0 : w.s_n();
    const int N = w.total_units();
    Eigen::VectorXd theta4_r = Eigen::VectorXd::Zero(N);
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        const auto& es = w.cluster_entries(k);
        for (std::size_t t = 0; t < es.size(); ++t)
            theta4_r[off + es[t].receiver] +=
                dec.sender_given_recv[k][t] * theta(k, es[t].receiver, es[t].sender).second;
    }
    double num4r = 0.0, den4r = 0.0;
    for (int i = 0; i < N; ++i) {
        const double sr = dec.receiver_marginal[i] / scale;
        num4r += sr * xd[i] * xd[i] * theta4_r[i];
        den4r += sr * xd[i] * xd[i];
    }
    q.beta_p4_r = num4r / den4r;
    return q;
}

std::map<std::string, double> assumption_diagnostics(const ThetaMap& theta,
                                                     const EstimandWeights& w,
                                                     const Eigen::VectorXd& X, double x) {
    std::map<std::string, double> out;
    const DemeanedCovariates dm = demeaned_covariates(w, X);
    const double total = w.entry_sum();
    const double s_n = w.s_n();

    // Distinct coefficient levels over the supported dyads.
    auto level_of = [](std::vector<double>& levels, double v) {
        for (std::size_t a = 0; a < levels.size(); ++a)
            if (std::abs(levels[a] - v) < 1e-9) return a;
        levels.push_back(v);
        return levels.size() - 1;
    };

    for (int h = 0; h < 2; ++h) {  // h = 0 -> theta3, 1 -> theta4
        std::vector<double> levels;
        std::vector<double> sums;
        for (int k = 0; k < w.cluster_count(); ++k) {
            const int off = w.unit_offset(k);
            for (const auto& e : w.cluster_entries(k)) {
                const auto [t3, t4] = theta(k, e.receiver, e.sender);
                const std::size_t a = level_of(levels, h == 0 ? t3 : t4);
                if (a >= sums.size()) sums.resize(a + 1, 0.0);
                sums[a] += (e.w / total) * dm.x_tilde[off + e.sender];
            }
        }
        double worst = 0.0;
        for (double s : sums) worst = std::max(worst, std::abs(s));
        out[h == 0 ? "stmt1_h3_max" : "stmt1_h4_max"] = s_n * worst;
    }

    // Statement 2(a): conditional sender weights per receiver sum to one.
    const Decomposition& dec = w.decomposition();
    {
        const int N = w.total_units();
        std::vector<double> row(N, 0.0);
        std::vector<bool> seen(N, false);
        for (int k = 0; k < w.cluster_count(); ++k) {
            const int off = w.unit_offset(k);
            const auto& es = w.cluster_entries(k);
            for (std::size_t t = 0; t < es.size(); ++t) {
                row[off + es[t].receiver] += dec.sender_given_recv[k][t];
                seen[off + es[t].receiver] = true;
            }
        }
        double dev = 0.0;
        for (int i = 0; i < N; ++i)
            if (seen[i]) dev = std::max(dev, std::abs(row[i] - 1.0));
        out["stmt2a_max_dev"] = dev;
    }

    // Statement 2(b): theta constant across senders for each receiver.
    {
        double varies = 0.0;
        for (int k = 0; k < w.cluster_count() && varies == 0.0; ++k) {
            const auto& es = w.cluster_entries(k);
            std::map<int, std::pair<double, double>> first;
            for (const auto& e : es) {
                const auto th = theta(k, e.receiver, e.sender);
                auto [it, fresh] = first.emplace(e.receiver, th);
                if (!fresh && (std::abs(it->second.first - th.first) > 1e-9 ||
                               std::abs(it->second.second - th.second) > 1e-9)) {
                    varies = 1.0;
                    break;
                }
            }
        }
        out["stmt2b_theta_varies_in_sender"] = varies;
    }

    // Statement 2(c): per-receiver covariate aggregates against the mean,
    // within coefficient levels, over receivers carrying weight.
    {
        const int N = w.total_units();
        const double scale = w.rescaled() ? 1.0 : s_n;
        Eigen::VectorXd raw = Eigen::VectorXd::Zero(N);
        Eigen::VectorXd theta3_r = Eigen::VectorXd::Zero(N), theta4_r = Eigen::VectorXd::Zero(N);
        std::vector<bool> seen(N, false);
        for (int k = 0; k < w.cluster_count(); ++k) {
            const int off = w.unit_offset(k);
            const auto& es = w.cluster_entries(k);
            for (std::size_t t = 0; t < es.size(); ++t) {
                const int gi = off + es[t].receiver;
                raw[gi] += dec.sender_given_recv[k][t] * X[off + es[t].sender];
                const auto th = theta(k, es[t].receiver, es[t].sender);
                theta3_r[gi] += dec.sender_given_recv[k][t] * th.first;
                theta4_r[gi] += dec.sender_given_recv[k][t] * th.second;
            }
        }
        for (int k = 0; k < w.cluster_count(); ++k) {
            const int off = w.unit_offset(k);
            for (const auto& e : w.cluster_entries(k)) seen[off + e.receiver] = true;
        }
        for (int h = 0; h < 2; ++h) {
            std::vector<double> levels, sums;
            for (int i = 0; i < N; ++i) {
                if (!seen[i]) continue;
                const double tv = h == 0 ? theta3_r[i] : theta4_r[i];
                std::size_t a;
                for (a = 0; a < levels.size(); ++a)
                    if (std::abs(levels[a] - tv) < 1e-9) break;
                if (a == levels.size()) {
                    levels.push_back(tv);
                    sums.push_back(0.0);
                }
                sums[a] += dec.receiver_marginal[i] / scale * (raw[i] - dm.x_bar);
            }
            double worst = 0.0;
            for (double s : sums) worst = std::max(worst, std::abs(s));
            out[h == 0 ? "stmt2c_h3_max" : "stmt2c_h4_max"] = s_n * worst;
        }
    }

    // Independence between coefficients and covariates: population averages
    // of theta against their x-restricted counterparts.
    {
        double p3 = 0.0, p4 = 0.0, c3 = 0.0, c4 = 0.0, cden = 0.0;
        for (int k = 0; k < w.cluster_count(); ++k) {
            const int off = w.unit_offset(k);
            for (const auto& e : w.cluster_entries(k)) {
                const auto [t3, t4] = theta(k, e.receiver, e.sender);
                p3 += (e.w / total) * t3;
                p4 += (e.w / total) * t4;
                if (X[off + e.sender] == x) {
                    c3 += e.w * t3;
                    c4 += e.w * t4;
                    cden += e.w;
                }
            }
        }
        if (cden > 0.0) {
            c3 /= cden;
            c4 /= cden;
            out["a8_gap_h3"] = s_n * std::abs(p3 - c3);
            out["a8_gap_h4"] = s_n * std::abs(p4 - c4);
            const PopulationQuantities q = population_quantities(theta, w, X);
            out["a8_gap_h4_ds"] = s_n * std::abs(q.beta_p4_ds - c4);
            out["a8_gap_h4_r"] = s_n * std::abs(q.beta_p4_r - c4);
        }
    }
    return out;
}

std::string oracle_report_json(const OracleTruth& t) {
    nlohmann::json j;
    j["tau_ase"] = t.tau_ase;
    nlohmann::json cse = nlohmann::json::object();
    for (const auto& [x, v] : t.tau_cse) cse[std::to_string(x)] = v;
    j["tau_cse"] = cse;
    nlohmann::json br = nlohmann::json::object();
    for (const auto& [name, v] : t.beta_r)
        br[name] = std::vector<double>(v.data(), v.data() + v.size());
    j["beta_r"] = br;
    j["beta_p"] = {{"beta_p3", t.beta_p.beta_p3},
                   {"beta_p4_ds", t.beta_p.beta_p4_ds},
                   {"beta_p4_r", t.beta_p.beta_p4_r}};
    j["diagnostics"] = t.diagnostics;
    j["residual_moment_max"] = t.residual_moment_max;
    return j.dump(2);
}

}  // namespace spillover
