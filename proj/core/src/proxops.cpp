#include "leadlag/proxops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "leadlag/errors.hpp"

namespace leadlag {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* who) {
    if (!m.allFinite()) {
        throw NonFiniteInputError(std::string(who) + ": input contains NaN or Inf");
    }
}

// Largest-magnitude entry of each left singular (or eigen-) vector made
// positive; the paired right vector flips with it so the product is
// unchanged.
void fix_signs(Eigen::MatrixXd& u, Eigen::MatrixXd* v) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Index idx = 0;
        u.col(j).cwiseAbs().maxCoeff(&idx);
        if (u(idx, j) < 0.0) {
            u.col(j) = -u.col(j);
            if (v != nullptr) {
                v->col(j) = -v->col(j);
            }
        }
    }
}

} // namespace

SvdFactors svd_decompose(const Eigen::MatrixXd& m) {
    require_finite(m, "svd_decompose");
    Eigen::MatrixXd u, v;
    Eigen::VectorXd s;
    // Jacobi is more accurate for small blocks; divide-and-conquer scales to
    // the desk-size limit.
    if (std::min(m.rows(), m.cols()) < 32) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u = svd.matrixU();
        v = svd.matrixV();
        s = svd.singularValues();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        u = svd.matrixU();
        v = svd.matrixV();
        s = svd.singularValues();
    }
    fix_signs(u, &v);
    return SvdFactors{std::move(u), std::move(s), v.transpose()};
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& m, double tau) {
    return svt_with_rank(m, tau).value;
}

SvtResult svt_with_rank(const Eigen::MatrixXd& m, double tau) {
    if (!(tau >= 0.0)) {
        throw ConfigError("svt: threshold must be >= 0");
    }
    if (tau == 0.0) {
        require_finite(m, "svt");
        SvdFactors f = svd_decompose(m);
        return SvtResult{m, (f.s.array() > 0.0).count(), f.s.sum()};
    }
    SvdFactors f = svd_decompose(m);
    Eigen::VectorXd shrunk = (f.s.array() - tau).max(0.0);
    Eigen::Index rank = (shrunk.array() > 0.0).count();
    SvtResult out;
    out.rank = rank;
    out.nuclear_norm = shrunk.sum();
    if (rank == 0) {
        out.value = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    } else {
        out.value = f.u.leftCols(rank) * shrunk.head(rank).asDiagonal() * f.vt.topRows(rank);
    }
    return out;
}

Eigen::MatrixXd group_soft_threshold(const Eigen::MatrixXd& m, double tau) {
    if (!(tau >= 0.0)) {
        throw ConfigError("group_soft_threshold: threshold must be >= 0");
    }
    require_finite(m, "group_soft_threshold");
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double norm = m.col(j).norm();
        if (norm <= tau) {
            out.col(j).setZero();
        } else {
            out.col(j) = m.col(j) * (1.0 - tau / norm);
        }
    }
    return out;
}

double l21_norm(const Eigen::MatrixXd& m) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        sum += m.col(j).norm();
    }
    return sum;
}

Eigen::Index nonzero_columns(const Eigen::MatrixXd& m, double tol) {
    Eigen::Index count = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m.col(j).norm() > tol) {
            ++count;
        }
    }
    return count;
}

Eigen::MatrixXd smallest_eigenvectors(const Eigen::MatrixXd& c, Eigen::Index k) {
    require_finite(c, "smallest_eigenvectors");
    if (c.rows() != c.cols()) {
        throw AsymmetricInputError("smallest_eigenvectors: matrix is not square");
    }
    if (k < 1 || k > c.rows()) {
        throw ConfigError("smallest_eigenvectors: need 1 <= k <= N");
    }
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    const double asym = (c - c.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw AsymmetricInputError("smallest_eigenvectors: matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
    Eigen::MatrixXd vecs = es.eigenvectors().leftCols(k); // ascending eigenvalues
    fix_signs(vecs, nullptr);
    return vecs;
}

StiefelResult stiefel_minimize(
    const std::function<double(const Eigen::MatrixXd&)>& objective,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& gradient,
    const Eigen::MatrixXd& a0, const StiefelOptions& opts) {
    const Eigen::Index n = a0.rows();
    const Eigen::Index k = a0.cols();
    if (k > n) {
        throw ConfigError("stiefel_minimize: need k <= N");
    }
    require_finite(a0, "stiefel_minimize");
    const double start_ortho =
        (a0.transpose() * a0 - Eigen::MatrixXd::Identity(k, k)).norm();
    if (start_ortho > 1e-8) {
        throw NonOrthonormalStartError("stiefel_minimize: A0^T A0 deviates from identity");
    }

    StiefelResult res;
    res.max_ortho_error = start_ortho;

    Eigen::MatrixXd x = a0;
    double f = objective(x);
    const double f0 = f;
    Eigen::MatrixXd g = gradient(x);
    int accepted_steps = 0;
    double tau = opts.tau0;
    Eigen::MatrixXd prev_x, prev_dir;
    bool have_prev = false;

    const Eigen::MatrixXd eye2k = Eigen::MatrixXd::Identity(2 * k, 2 * k);

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        res.iterations = iter + 1;
        // Canonical descent direction D = W X with W = G X^T - X G^T;
        // D = G - X (G^T X).
        Eigen::MatrixXd dir = g - x * (g.transpose() * x);
        const double gnorm = dir.norm();
        if (gnorm <= opts.grad_tol) {
            res.converged = true;
            res.iterations = iter;
            break;
        }

        // Barzilai-Borwein step from the previous move, alternating forms.
        if (have_prev) {
            Eigen::MatrixXd s = x - prev_x;
            Eigen::MatrixXd yv = dir - prev_dir;
            const double sy = std::abs((s.array() * yv.array()).sum());
            double bb;
            if (iter % 2 == 0) {
                bb = s.squaredNorm() / std::max(sy, 1e-300);
            } else {
                bb = sy / std::max(yv.squaredNorm(), 1e-300);
            }
            tau = std::clamp(bb, opts.tau_min, opts.tau_max);
        }

        // Low-rank Cayley transform: X(t) = X - t U (I + t/2 V^T U)^-1 V^T X.
        Eigen::MatrixXd u_blk(n, 2 * k), v_blk(n, 2 * k);
        u_blk << g, x;
        v_blk << x, -g;
        const Eigen::MatrixXd vtu = v_blk.transpose() * u_blk;
        const Eigen::MatrixXd vtx = v_blk.transpose() * x;

        prev_x = x;
        prev_dir = dir;

        bool step_taken = false;
        double t = tau;
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            Eigen::MatrixXd core = eye2k + (t / 2.0) * vtu;
            Eigen::MatrixXd candidate = x - t * u_blk * core.lu().solve(vtx);
            double drift =
                (candidate.transpose() * candidate - Eigen::MatrixXd::Identity(k, k)).norm();
            if (drift > 1e-12) {
                // Rare at desk scale; re-orthonormalize before judging the step.
                Eigen::HouseholderQR<Eigen::MatrixXd> qr(candidate);
                Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
                Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
                for (Eigen::Index j = 0; j < k; ++j) {
                    if (r(j, j) < 0.0) {
                        q.col(j) = -q.col(j);
                    }
                }
                candidate = q;
                drift = (candidate.transpose() * candidate - Eigen::MatrixXd::Identity(k, k))
                            .norm();
            }
            const double f_cand = objective(candidate);
            if (std::isfinite(f_cand) && f_cand <= f - opts.armijo_c * t * gnorm * gnorm) {
                x = candidate;
                f = f_cand;
                res.max_ortho_error = std::max(res.max_ortho_error, drift);
                step_taken = true;
                break;
            }
            t /= 2.0;
            if (t < opts.tau_min) {
                break;
            }
        }
        if (!step_taken) {
            break;
        }
        ++accepted_steps;
        have_prev = true;
        g = gradient(x);
    }

    if (accepted_steps == 0 && !res.converged) {
        res.a = a0;
        res.objective = f0;
        res.no_descent = true;
        return res;
    }
    res.a = std::move(x);
    res.objective = f;
    return res;
}

} // namespace leadlag
