#include "spillover/wls.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "spillover/errors.hpp"

namespace spillover {

const char* to_string(Mode m) { return m == Mode::ase ? "ase" : "cse"; }

const char* to_string(Formulation f) {
    switch (f) {
        case Formulation::dyadic: return "dyadic";
        case Formulation::receiver: return "receiver";
        case Formulation::sender: return "sender";
    }
    return "?";
}

DemeanedCovariates demeaned_covariates(const EstimandWeights& w, const Eigen::VectorXd& X) {
    if (X.size() != w.total_units())
        throw LengthMismatch("covariate vector must have one value per unit");
    double num = 0.0, den = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            num += e.w * X[off + e.sender];
            den += e.w;
        }
    }
    if (den <= 0.0) throw EmptyEstimand("weights sum to zero");
    DemeanedCovariates out;
    out.x_bar = num / den;
    out.x_tilde = X.array() - out.x_bar;
    return out;
}

TransformedRegressors transformed_regressors(const Eigen::VectorXd& Z,
                                             const Eigen::VectorXd& x_tilde) {
    if (Z.size() != x_tilde.size()) throw LengthMismatch("Z and x_tilde lengths differ");
    TransformedRegressors t;
    t.z_star = Z.array() - 0.5;
    t.zx_star = (Z.array() - 0.5) * x_tilde.array();
    return t;
}

Eigen::VectorXd aggregated_covariate(const EstimandWeights& w, const Eigen::VectorXd& X) {
    if (X.size() != w.total_units())
        throw LengthMismatch("covariate vector must have one value per unit");
    const Decomposition& d = w.decomposition();
    const int N = w.total_units();
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(N);  // conditionally weighted sender covariate
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        const auto& es = w.cluster_entries(k);
        for (std::size_t t = 0; t < es.size(); ++t)
            raw[off + es[t].receiver] += d.sender_given_recv[k][t] * X[off + es[t].sender];
    }
    // Marginals enter on the rescaled scale whatever the weights' state.
    const double scale = w.rescaled() ? 1.0 : w.s_n();
    double center = 0.0;
    for (int i = 0; i < N; ++i) center += d.receiver_marginal[i] / scale * raw[i];
    return raw.array() - center;
}

DesignContext make_design_context(Mode mode, Formulation f, const EstimandWeights& w,
                                  const Eigen::VectorXd* X) {
    DesignContext ctx;
    ctx.mode = mode;
    ctx.f = f;
    if (mode != Mode::cse) return ctx;
    if (!X) throw MissingCovariate("cse mode needs a covariate vector");
    if (!w.rescaled() && std::abs(w.entry_sum() - 1.0) > 1e-9)
        throw BadParam("cse systems are built from rescaled weights");
    auto dm = demeaned_covariates(w, *X);
    ctx.x_bar = dm.x_bar;
    ctx.x_tilde = std::move(dm.x_tilde);
    if (f == Formulation::receiver) ctx.x_dagger = aggregated_covariate(w, *X);
    return ctx;
}

namespace {

void check_zy(const ClusteredNetwork& net, const Eigen::VectorXd& Z, const Eigen::VectorXd& Y) {
    if (Z.size() != net.total_units() || Y.size() != net.total_units())
        throw LengthMismatch("Z and Y must have one value per unit");
}

// Per-sender design row shared by the dyadic and sender formulations:
// (1, Z) or (1, x_tilde, Z - 1/2, (Z - 1/2) x_tilde).
inline void sender_row(const DesignContext& ctx, int gj, double zj, double* v) {
    v[0] = 1.0;
    if (ctx.mode == Mode::ase) {
        v[1] = zj;
    } else {
        const double xt = ctx.x_tilde[gj];
        v[1] = xt;
        v[2] = zj - 0.5;
        v[3] = (zj - 0.5) * xt;
    }
}

Eigen::VectorXd cluster_w(const AssignmentDesign& alpha, const AssignmentDesign& beta, int k,
                          const Eigen::VectorXd& z_k, double w_perturb_treated) {
    Eigen::VectorXd wv = estimator_weights_cluster(alpha, beta, k, z_k);
    // Injected-fault hook: a per-arm rescaling of W would be absorbed by the
    // arm-wise exact fit, so the perturbation keys on the cluster's treated
    // count as well as the sender's own arm.
    if (w_perturb_treated != 1.0 && 2.0 * z_k.sum() > static_cast<double>(z_k.size()))
        for (Eigen::Index j = 0; j < wv.size(); ++j)
            if (z_k[j] == 1.0) wv[j] *= w_perturb_treated;
    return wv;
}

}  // namespace

void accumulate_cluster_moments(const DesignContext& ctx, const EstimandWeights& w, int k,
                                const Eigen::VectorXd& z_k, const Eigen::VectorXd& y_k,
                                const Eigen::VectorXd& wts, double scale, Eigen::MatrixXd& a,
                                Eigen::VectorXd& b, double* treated, double* control) {
    const int dim = ctx.mode == Mode::ase ? 2 : 4;
    const int off = w.unit_offset(k);
    const auto& es = w.cluster_entries(k);
    double v[4];

    auto arm = [&](double zj, double bw) {
        if (treated && zj == 1.0) *treated += scale * bw;
        if (control && zj != 1.0) *control += scale * bw;
    };

    switch (ctx.f) {
        case Formulation::dyadic: {
            // Entries are sender-sorted; each sender's run shares one design
            // row, so it folds into a single rank-1 update.
            std::size_t t = 0;
            while (t < es.size()) {
                const int j = es[t].sender;
                double sw = 0.0, swy = 0.0;
                for (; t < es.size() && es[t].sender == j; ++t) {
                    sw += es[t].w;
                    swy += es[t].w * y_k[es[t].receiver];
                }
                const double wj = wts[j];
                sender_row(ctx, off + j, z_k[j], v);
                for (int p = 0; p < dim; ++p) {
                    for (int q = p; q < dim; ++q) a(p, q) += scale * sw * wj * v[p] * v[q];
                    b[p] += scale * wj * v[p] * swy;
                }
                arm(z_k[j], sw * wj);
            }
            break;
        }
        case Formulation::sender: {
            const Decomposition& dec = w.decomposition();
            std::size_t t = 0;
            while (t < es.size()) {
                const int j = es[t].sender;
                const double s_tilde = dec.s_tilde[off + j];
                double agg_y = 0.0;
                for (; t < es.size() && es[t].sender == j; ++t)
                    agg_y += dec.recv_given_sender[k][t] * y_k[es[t].receiver];
                if (s_tilde <= 0.0) continue;
                agg_y /= s_tilde;
                const double bw = s_tilde * dec.sender_marginal[off + j] * wts[j];
                sender_row(ctx, off + j, z_k[j], v);
                for (int p = 0; p < dim; ++p) {
                    for (int q = p; q < dim; ++q) a(p, q) += scale * bw * v[p] * v[q];
                    b[p] += scale * bw * v[p] * agg_y;
                }
                arm(z_k[j], bw);
            }
            break;
        }
        case Formulation::receiver: {
            const int n = static_cast<int>(z_k.size());
            Eigen::VectorXd b1 = Eigen::VectorXd::Zero(n);
            Eigen::VectorXd b0 = Eigen::VectorXd::Zero(n);
            for (const auto& e : es) {
                const double bw = e.w * wts[e.sender];
                (z_k[e.sender] == 1.0 ? b1 : b0)[e.receiver] += bw;
            }
            for (int i = 0; i < n; ++i) {
                const double yi = y_k[i];
                if (treated) *treated += scale * b1[i];
                if (control) *control += scale * b0[i];
                if (ctx.mode == Mode::ase) {
                    a(0, 0) += scale * (b1[i] + b0[i]);
                    a(0, 1) += scale * b1[i];
                    a(1, 1) += scale * b1[i];
                    b[0] += scale * (b1[i] + b0[i]) * yi;
                    b[1] += scale * b1[i] * yi;
                } else {
                    const double xd = ctx.x_dagger[off + i];
                    a(0, 0) += scale * (b1[i] + b0[i]);
                    a(0, 2) += scale * b1[i];
                    a(2, 2) += scale * b1[i];
                    a(1, 1) += scale * (b1[i] + b0[i]) * xd * xd;
                    a(1, 3) += scale * b1[i] * xd * xd;
                    a(3, 3) += scale * b1[i] * xd * xd;
                    b[0] += scale * (b1[i] + b0[i]) * yi;
                    b[2] += scale * b1[i] * yi;
                    b[1] += scale * (b1[i] + b0[i]) * xd * yi;
                    b[3] += scale * b1[i] * xd * yi;
                }
            }
            break;
        }
    }
}

WlsStats build_stats(Mode mode, Formulation f, const ClusteredNetwork& net,
                     const EstimandWeights& w, const AssignmentDesign& alpha,
                     const AssignmentDesign& beta, const Eigen::VectorXd& Z,
                     const Eigen::VectorXd& Y, const Eigen::VectorXd* X,
                     double w_perturb_treated) {
    check_zy(net, Z, Y);
    if (w.total_units() != net.total_units() || w.cluster_count() != net.cluster_count())
        throw LengthMismatch("weights were built on a different network shape");
    if (f == Formulation::sender && !w.has_decomposition())
        throw MissingDecomposition("sender formulation needs the weight decomposition");
    const DesignContext ctx = make_design_context(mode, f, w, X);
    const int dim = mode == Mode::ase ? 2 : 4;
    const int K = net.cluster_count();

    WlsStats st;
    st.mode = mode;
    st.formulation = f;
    st.dim = dim;
    st.s_n = w.s_n();
    st.x_bar = ctx.x_bar;
    st.a = Eigen::MatrixXd::Zero(dim, dim);
    st.bvec = Eigen::VectorXd::Zero(dim);
    st.a_k.assign(K, Eigen::MatrixXd::Zero(dim, dim));
    st.b_k.assign(K, Eigen::VectorXd::Zero(dim));

    for (int k = 0; k < K; ++k) {
        const int off = net.unit_offset(k);
        const int n = net.cluster(k).size;
        const Eigen::VectorXd z_k = Z.segment(off, n);
        const Eigen::VectorXd y_k = Y.segment(off, n);
        const Eigen::VectorXd wts = cluster_w(alpha, beta, k, z_k, w_perturb_treated);
        accumulate_cluster_moments(ctx, w, k, z_k, y_k, wts, 1.0, st.a_k[k], st.b_k[k],
                                   &st.treated_weight, &st.control_weight);
        st.a_k[k] = st.a_k[k].selfadjointView<Eigen::Upper>();
        st.a += st.a_k[k];
        st.bvec += st.b_k[k];
    }
    return st;
}

WlsSystem build_system(Mode mode, Formulation f, const ClusteredNetwork& net,
                       const EstimandWeights& w, const AssignmentDesign& alpha,
                       const AssignmentDesign& beta, const Eigen::VectorXd& Z,
                       const Eigen::VectorXd& Y, const Eigen::VectorXd* X,
                       double w_perturb_treated) {
    check_zy(net, Z, Y);
    if (f == Formulation::sender && !w.has_decomposition())
        throw MissingDecomposition("sender formulation needs the weight decomposition");
    const DesignContext ctx = make_design_context(mode, f, w, X);
    const int dim = mode == Mode::ase ? 2 : 4;
    const int K = net.cluster_count();

    Eigen::Index rows = 0;
    for (int k = 0; k < K; ++k) {
        const int n = net.cluster(k).size;
        if (f == Formulation::dyadic)
            rows += static_cast<Eigen::Index>(n) * (n - 1);
        else if (f == Formulation::sender)
            rows += n;
        else
            rows += static_cast<Eigen::Index>(n) * (mode == Mode::ase ? 2 : 4);
    }

    WlsSystem sys;
    sys.mode = mode;
    sys.formulation = f;
    sys.s_n = w.s_n();
    sys.x_bar = ctx.x_bar;
    sys.y.resize(rows);
    sys.b.resize(rows);
    sys.v.resize(rows, dim);
    sys.cluster_rows.resize(K);

    const Decomposition* dec = w.has_decomposition() ? &w.decomposition() : nullptr;
    double v[4];
    Eigen::Index r = 0;
    for (int k = 0; k < K; ++k) {
        const Cluster& c = net.cluster(k);
        const int off = net.unit_offset(k);
        const int n = c.size;
        const Eigen::VectorXd z_k = Z.segment(off, n);
        const Eigen::VectorXd wts = cluster_w(alpha, beta, k, z_k, w_perturb_treated);
        const Eigen::Index begin = r;
        const auto& es = w.cluster_entries(k);

        switch (f) {
            case Formulation::dyadic: {
                // All ordered dyads appear as rows; off-support dyads carry
                // zero weight.
                Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
                for (const auto& e : es) s(e.receiver, e.sender) = e.w;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        sys.y[r] = Y[off + i];
                        sys.b[r] = s(i, j) * wts[j];
                        sender_row(ctx, off + j, z_k[j], v);
                        for (int p = 0; p < dim; ++p) sys.v(r, p) = v[p];
                        ++r;
                    }
                break;
            }
            case Formulation::sender: {
                Eigen::VectorXd agg_y = Eigen::VectorXd::Zero(n);
                for (std::size_t t = 0; t < es.size(); ++t)
                    agg_y[es[t].sender] += dec->recv_given_sender[k][t] * Y[off + es[t].receiver];
                for (int j = 0; j < n; ++j) {
                    const double s_tilde = dec->s_tilde[off + j];
                    sys.y[r] = s_tilde > 0.0 ? agg_y[j] / s_tilde : 0.0;
                    sys.b[r] = s_tilde * dec->sender_marginal[off + j] * wts[j];
                    sender_row(ctx, off + j, z_k[j], v);
                    for (int p = 0; p < dim; ++p) sys.v(r, p) = v[p];
                    ++r;
                }
                break;
            }
            case Formulation::receiver: {
                Eigen::VectorXd b1 = Eigen::VectorXd::Zero(n);
                Eigen::VectorXd b0 = Eigen::VectorXd::Zero(n);
                for (const auto& e : es) {
                    const double bw = e.w * wts[e.sender];
                    (z_k[e.sender] == 1.0 ? b1 : b0)[e.receiver] += bw;
                }
                if (mode == Mode::ase) {
                    // Treated block [1 1], then control block [1 0].
                    for (int i = 0; i < n; ++i, ++r) {
                        sys.y[r] = Y[off + i];
                        sys.b[r] = b1[i];
                        sys.v(r, 0) = 1.0;
                        sys.v(r, 1) = 1.0;
                    }
                    for (int i = 0; i < n; ++i, ++r) {
                        sys.y[r] = Y[off + i];
                        sys.b[r] = b0[i];
                        sys.v(r, 0) = 1.0;
                        sys.v(r, 1) = 0.0;
                    }
                } else {
                    // Weight stack (B1, B1, B0, B0): treated main rows,
                    // treated aggregated-covariate rows, then the control
                    // counterparts.
                    for (int i = 0; i < n; ++i, ++r) {
                        sys.y[r] = Y[off + i];
                        sys.b[r] = b1[i];
                        sys.v.row(r) << 1, 0, 1, 0;
                    }
                    for (int i = 0; i < n; ++i, ++r) {
                        const double xd = ctx.x_dagger[off + i];
                        sys.y[r] = Y[off + i];
                        sys.b[r] = b1[i];
                        sys.v.row(r) << 0, xd, 0, xd;
                    }
                    for (int i = 0; i < n; ++i, ++r) {
                        sys.y[r] = Y[off + i];
                        sys.b[r] = b0[i];
                        sys.v.row(r) << 1, 0, 0, 0;
                    }
                    for (int i = 0; i < n; ++i, ++r) {
                        const double xd = ctx.x_dagger[off + i];
                        sys.y[r] = Y[off + i];
                        sys.b[r] = b0[i];
                        sys.v.row(r) << 0, xd, 0, 0;
                    }
                }
                break;
            }
        }
        sys.cluster_rows[k] = {begin, r};
    }
    return sys;
}

WlsStats reduce(const WlsSystem& sys) {
    const int dim = static_cast<int>(sys.v.cols());
    WlsStats st;
    st.mode = sys.mode;
    st.formulation = sys.formulation;
    st.dim = dim;
    st.s_n = sys.s_n;
    st.x_bar = sys.x_bar;
    st.a = Eigen::MatrixXd::Zero(dim, dim);
    st.bvec = Eigen::VectorXd::Zero(dim);
    const int K = static_cast<int>(sys.cluster_rows.size());
    st.a_k.assign(K, Eigen::MatrixXd::Zero(dim, dim));
    st.b_k.assign(K, Eigen::VectorXd::Zero(dim));
    for (int k = 0; k < K; ++k) {
        auto [lo, hi] = sys.cluster_rows[k];
        const auto vk = sys.v.middleRows(lo, hi - lo);
        const auto bk = sys.b.segment(lo, hi - lo);
        const auto yk = sys.y.segment(lo, hi - lo);
        st.a_k[k] = vk.transpose() * bk.asDiagonal() * vk;
        st.b_k[k] = vk.transpose() * (bk.array() * yk.array()).matrix();
        st.a += st.a_k[k];
        st.bvec += st.b_k[k];
    }
    // Arm totals are recoverable from V'BV in every layout.
    const double total = st.a(0, 0);
    double treated;
    if (sys.mode == Mode::ase)
        treated = st.a(0, 1);
    else if (sys.formulation == Formulation::receiver)
        treated = st.a(0, 2);
    else
        treated = st.a(0, 2) + 0.5 * total;  // sum B(Z - 1/2) + sum B / 2
    st.treated_weight = treated;
    st.control_weight = total - treated;
    return st;
}

Eigen::VectorXd solve(const WlsStats& stats, double rcond_min) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stats.a);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double lmax = ev.cwiseAbs().maxCoeff();
    const double lmin = ev.cwiseAbs().minCoeff();
    if (!(lmax > 0.0) || lmin / lmax < rcond_min)
        throw SingularDesign("V'BV is singular or ill-conditioned (rcond " +
                             std::to_string(lmax > 0.0 ? lmin / lmax : 0.0) +
                             "); a treatment arm or covariate contrast is missing");
    return es.eigenvectors() * (es.eigenvectors().transpose() * stats.bvec).cwiseQuotient(ev);
}

double hajek_ase(const ClusteredNetwork& net, const EstimandWeights& w,
                 const AssignmentDesign& alpha, const AssignmentDesign& beta,
                 const Eigen::VectorXd& Z, const Eigen::VectorXd& Y) {
    check_zy(net, Z, Y);
    double tw = 0.0, twy = 0.0, cw = 0.0, cwy = 0.0;
    for (int k = 0; k < net.cluster_count(); ++k) {
        const int off = net.unit_offset(k);
        const Eigen::VectorXd z_k = Z.segment(off, net.cluster(k).size);
        const Eigen::VectorXd wts = estimator_weights_cluster(alpha, beta, k, z_k);
        for (const auto& e : w.cluster_entries(k)) {
            const double bw = e.w * wts[e.sender];
            if (z_k[e.sender] == 1.0) {
                tw += bw;
                twy += bw * Y[off + e.receiver];
            } else {
                cw += bw;
                cwy += bw * Y[off + e.receiver];
            }
        }
    }
    if (tw <= 0.0 || cw <= 0.0)
        throw DegenerateArm("a weighted treatment arm has zero total weight");
    return w.s_n() * (twy / tw - cwy / cw);
}

double weighted_mean_sq_sender(const EstimandWeights& w, const Eigen::VectorXd& per_unit) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            num += e.w * per_unit[off + e.sender] * per_unit[off + e.sender];
            den += e.w;
        }
    }
    return num / den;
}

double weighted_mean_sq_receiver(const EstimandWeights& w, const Eigen::VectorXd& per_unit) {
    double num = 0.0, den = 0.0;
    for (int k = 0; k < w.cluster_count(); ++k) {
        const int off = w.unit_offset(k);
        for (const auto& e : w.cluster_entries(k)) {
            num += e.w * per_unit[off + e.receiver] * per_unit[off + e.receiver];
            den += e.w;
        }
    }
    return num / den;
}

}  // namespace spillover
