// Characteristic-function inversion for the distribution of a linear
// combination of chi-square variables (Davies, Applied Statistics AS 155).
// The control flow mirrors the reference algorithm: find a truncation point
// for the integral, optionally introduce a convergence factor, locate the
// range of the distribution, then integrate with the trapezoidal rule,
// possibly in several passes with an auxiliary integration.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "seagle/errors.hpp"
#include "seagle/pvalue.hpp"

namespace seagle {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLog28 = 0.0866;  // log(28) / 40, underflow guard in cfe

struct CallLimitExceeded {};

double exp1(double x) { return x < -50.0 ? 0.0 : std::exp(x); }
double square(double x) { return x * x; }
double cube(double x) { return x * x * x; }

// log(1 + x), or log(1 + x) - x when `first` is false; series near 0.
double log1(double x, bool first) {
    if (std::abs(x) > 0.1) {
        return first ? std::log1p(x) : (std::log1p(x) - x);
    }
    double y = x / (2.0 + x);
    double term = 2.0 * cube(y);
    double k = 3.0;
    double s = (first ? 2.0 : -x) * y;
    y = square(y);
    for (double s1 = s + term / k; s1 != s; s1 = s + term / k) {
        k += 2.0;
        term *= y;
        s = s1;
    }
    return s;
}

class DaviesIntegrator {
public:
    DaviesIntegrator(std::span<const double> lambdas, double c, int lim)
        : lb_(lambdas.begin(), lambdas.end()),
          dof_(lambdas.size(), 1),
          nc_(lambdas.size(), 0.0),
          c_(c),
          lim_(lim) {}

    DaviesResult run(double acc);

private:
    void counter() {
        if (++count_ > lim_) throw CallLimitExceeded{};
    }
    void order();
    double errbd(double u, double& cx);
    double ctff(double accx, double& upn);
    double truncation(double u, double tausq);
    void findu(double& utx, double accx);
    void integrate(int nterm, double interv, double tausq, bool mainx);
    double cfe(double x);

    std::vector<double> lb_;
    std::vector<int> dof_;
    std::vector<double> nc_;
    std::vector<int> th_;
    double c_;
    int lim_;
    int count_ = 0;
    double sigsq_ = 0.0;
    double lmax_ = 0.0;
    double lmin_ = 0.0;
    double mean_ = 0.0;
    double intl_ = 0.0;
    double ersm_ = 0.0;
    bool sorted_ = false;
    bool fail_ = false;
};

// Indices of lb sorted by decreasing |lb|.
void DaviesIntegrator::order() {
    th_.resize(lb_.size());
    for (std::size_t j = 0; j < lb_.size(); ++j) th_[j] = static_cast<int>(j);
    std::stable_sort(th_.begin(), th_.end(),
                     [this](int a, int b) { return std::abs(lb_[a]) > std::abs(lb_[b]); });
    sorted_ = true;
}

// Bound on the tail probability when the integral is truncated; cx receives
// the corresponding cutoff.
double DaviesIntegrator::errbd(double u, double& cx) {
    counter();
    double xconst = u * sigsq_;
    double sum1 = u * xconst;
    u *= 2.0;
    for (std::size_t jj = lb_.size(); jj-- > 0;) {
        const double nj = dof_[jj];
        const double lj = lb_[jj];
        const double ncj = nc_[jj];
        const double x = u * lj;
        const double y = 1.0 - x;
        xconst += lj * (ncj / y + nj) / y;
        sum1 += ncj * square(x / y) + nj * (square(x) / y + log1(-x, false));
    }
    cx = xconst;
    return exp1(-0.5 * sum1);
}

// Cutoff c such that P(Q > c) < accx (upn > 0) or P(Q < c) < accx (upn < 0).
double DaviesIntegrator::ctff(double accx, double& upn) {
    double u2 = upn;
    double u1 = 0.0;
    double c1 = mean_;
    double c2 = 0.0;
    const double rb = 2.0 * ((u2 > 0.0) ? lmax_ : lmin_);
    for (double u = u2 / (1.0 + u2 * rb); errbd(u, c2) > accx; u = u2 / (1.0 + u2 * rb)) {
        u1 = u2;
        c1 = c2;
        u2 *= 2.0;
    }
    for (double u = (c1 - mean_) / (c2 - mean_); u < 0.9; u = (c1 - mean_) / (c2 - mean_)) {
        u = (u1 + u2) / 2.0;
        double xconst = 0.0;
        if (errbd(u / (1.0 + u * rb), xconst) > accx) {
            u1 = u;
            c1 = xconst;
        } else {
            u2 = u;
            c2 = xconst;
        }
    }
    upn = u2;
    return c2;
}

// Bound on the integration error from truncating at u.
double DaviesIntegrator::truncation(double u, double tausq) {
    counter();
    double sum1 = 0.0;
    double prod2 = 0.0;
    double prod3 = 0.0;
    int s = 0;
    const double sum2 = (sigsq_ + tausq) * square(u);
    double prod1 = 2.0 * sum2;
    u *= 2.0;
    for (std::size_t j = 0; j < lb_.size(); ++j) {
        const double lj = lb_[j];
        const double ncj = nc_[j];
        const int nj = dof_[j];
        const double x = square(u * lj);
        sum1 += ncj * x / (1.0 + x);
        if (x > 1.0) {
            prod2 += nj * std::log(x);
            prod3 += nj * log1(x, true);
            s += nj;
        } else {
            prod1 += nj * log1(x, true);
        }
    }
    sum1 *= 0.5;
    prod2 += prod1;
    prod3 += prod1;
    double x = exp1(-sum1 - 0.25 * prod2) / kPi;
    const double y = exp1(-sum1 - 0.25 * prod3) / kPi;
    double err1 = (s == 0) ? 1.0 : x * 2.0 / s;
    double err2 = (prod3 > 1.0) ? 2.5 * y : 1.0;
    if (err2 < err1) err1 = err2;
    x = 0.5 * sum2;
    err2 = (x <= y) ? 1.0 : y / x;
    return (err1 < err2) ? err1 : err2;
}

// Smallest truncation point (up to a factor) with truncation error <= accx.
void DaviesIntegrator::findu(double& utx, double accx) {
    static constexpr double divis[] = {2.0, 1.4, 1.2, 1.1};
    double ut = utx;
    double u = ut / 4.0;
    if (truncation(u, 0.0) > accx) {
        for (u = ut; truncation(u, 0.0) > accx; u = ut) ut *= 4.0;
    } else {
        ut = u;
        for (u /= 4.0; truncation(u, 0.0) <= accx; u /= 4.0) ut = u;
    }
    for (double d : divis) {
        u = ut / d;
        if (truncation(u, 0.0) <= accx) ut = u;
    }
    utx = ut;
}

void DaviesIntegrator::integrate(int nterm, double interv, double tausq, bool mainx) {
    const double inpi = interv / kPi;
    for (int k = nterm; k >= 0; --k) {
        const double u = (k + 0.5) * interv;
        double sum1 = -2.0 * u * c_;
        double sum2 = std::abs(sum1);
        double sum3 = -0.5 * sigsq_ * square(u);
        for (std::size_t jj = lb_.size(); jj-- > 0;) {
            const int nj = dof_[jj];
            const double x = 2.0 * lb_[jj] * u;
            double y = square(x);
            sum3 -= 0.25 * nj * log1(y, true);
            y = nc_[jj] * x / (1.0 + y);
            const double z = nj * std::atan(x) + y;
            sum1 += z;
            sum2 += std::abs(z);
            sum3 -= 0.5 * x * y;
        }
        double x = inpi * exp1(sum3) / u;
        if (!mainx) x *= 1.0 - exp1(-0.5 * tausq * square(u));
        sum1 = std::sin(0.5 * sum1) * x;
        sum2 = 0.5 * sum2 * x;
        intl_ += sum1;
        ersm_ += sum2;
    }
}

// Coefficient of tausq in the error introduced by the convergence factor.
double DaviesIntegrator::cfe(double x) {
    counter();
    if (!sorted_) order();
    double axl = std::abs(x);
    const double sxl = (x > 0.0) ? 1.0 : -1.0;
    double sum1 = 0.0;
    for (std::size_t jj = lb_.size(); jj-- > 0;) {
        const int t = th_[jj];
        if (lb_[t] * sxl > 0.0) {
            const double lj = std::abs(lb_[t]);
            const double axl1 = axl - lj * (dof_[t] + nc_[t]);
            const double axl2 = lj / kLog28;
            if (axl1 > axl2) {
                axl = axl1;
            } else {
                if (axl > axl2) axl = axl2;
                sum1 = (axl - axl1) / lj;
                for (std::size_t k = jj; k-- > 0;) sum1 += dof_[th_[k]] + nc_[th_[k]];
                break;
            }
        }
    }
    if (sum1 > 100.0) {
        fail_ = true;
        return 1.0;
    }
    return std::pow(2.0, sum1 / 4.0) / (kPi * square(axl));
}

DaviesResult DaviesIntegrator::run(double acc) {
    DaviesResult result;
    double acc1 = acc;
    double xlim = static_cast<double>(lim_);
    double cdf = -1.0;

    try {
        double sd = sigsq_;
        for (std::size_t j = 0; j < lb_.size(); ++j) {
            const double lj = lb_[j];
            sd += square(lj) * (2.0 * dof_[j] + 4.0 * nc_[j]);
            mean_ += lj * (dof_[j] + nc_[j]);
            if (lmax_ < lj) {
                lmax_ = lj;
            } else if (lmin_ > lj) {
                lmin_ = lj;
            }
        }
        if (sd == 0.0) {
            result.p = (c_ > 0.0) ? 0.0 : 1.0;
            return result;
        }
        sd = std::sqrt(sd);
        const double almx = (lmax_ < -lmin_) ? -lmin_ : lmax_;

        double utx = 16.0 / sd;
        double up = 4.5 / sd;
        double un = -up;
        findu(utx, 0.5 * acc1);

        if (c_ != 0.0 && almx > 0.07 * sd) {
            const double tausq = 0.25 * acc1 / cfe(c_);
            if (fail_) {
                fail_ = false;
            } else if (truncation(utx, tausq) < 0.2 * acc1) {
                sigsq_ += tausq;
                findu(utx, 0.25 * acc1);
            }
        }
        acc1 *= 0.5;

        double intv = 0.0;
        double xnt = 0.0;
        for (;;) {
            const double d1 = ctff(acc1, up) - c_;
            if (d1 < 0.0) {
                result.p = 0.0;
                return result;
            }
            const double d2 = c_ - ctff(acc1, un);
            if (d2 < 0.0) {
                result.p = 1.0;
                return result;
            }
            intv = 2.0 * kPi / std::max(d1, d2);
            xnt = utx / intv;
            const double xntm = 3.0 / std::sqrt(acc1);
            if (xnt <= xntm * 1.5) break;

            // Auxiliary integration with a convergence factor.
            if (xntm > xlim) {
                result.status = DaviesStatus::accuracy_not_achieved;
                result.p = 1.0;
                return result;
            }
            const int ntm = static_cast<int>(std::floor(xntm + 0.5));
            const double intv1 = utx / ntm;
            const double x = 2.0 * kPi / intv1;
            if (x <= std::abs(c_)) break;
            const double tausq = 0.33 * acc1 / (1.1 * (cfe(c_ - x) + cfe(c_ + x)));
            if (fail_) break;
            acc1 *= 0.67;
            integrate(ntm, intv1, tausq, false);
            xlim -= xntm;
            sigsq_ += tausq;
            result.integrations += 1;
            result.terms += ntm + 1;
            findu(utx, 0.25 * acc1);
            acc1 *= 0.75;
        }

        if (xnt > xlim) {
            result.status = DaviesStatus::accuracy_not_achieved;
            result.p = 1.0;
            return result;
        }
        const int nt = static_cast<int>(std::floor(xnt + 0.5));
        integrate(nt, intv, 0.0, true);
        result.integrations += 1;
        result.terms += nt + 1;
        cdf = 0.5 - intl_;
        result.error_bound = ersm_;

        // Round-off check, allowing for radix 8 or 16 arithmetic.
        const double upper = ersm_;
        const double x = upper + acc / 10.0;
        for (double rat : {1.0, 2.0, 4.0, 8.0}) {
            if (rat * x == rat * upper) result.status = DaviesStatus::roundoff_significant;
        }
    } catch (const CallLimitExceeded&) {
        result.status = DaviesStatus::integration_params_not_found;
        result.p = 1.0;
        return result;
    }

    result.p = std::clamp(1.0 - cdf, 0.0, 1.0);
    return result;
}

}  // namespace

std::string_view to_string(DaviesStatus status) {
    switch (status) {
        case DaviesStatus::ok: return "ok";
        case DaviesStatus::accuracy_not_achieved: return "accuracy_not_achieved";
        case DaviesStatus::roundoff_significant: return "roundoff_significant";
        case DaviesStatus::invalid_parameters: return "invalid_parameters";
        case DaviesStatus::integration_params_not_found: return "integration_params_not_found";
    }
    return "unknown";
}

DaviesResult pvalue_davies(double q, const WeightedChiSq& dist, const DaviesOptions& opts) {
    if (!(q >= 0.0) || !std::isfinite(q)) {
        throw ParameterError("pvalue_davies: q must be finite and nonnegative");
    }
    if (!(opts.accuracy > 0.0) || opts.max_terms < 1) {
        throw ParameterError("pvalue_davies: accuracy must be positive and max_terms >= 1");
    }
    DaviesResult first = DaviesIntegrator(dist.lambdas(), q, opts.max_terms).run(opts.accuracy);
    first.achieved_accuracy = opts.accuracy;
    if (first.status != DaviesStatus::accuracy_not_achieved &&
        first.status != DaviesStatus::integration_params_not_found) {
        return first;
    }
    // Best effort: relax the accuracy until the integration fits in the term
    // budget. The original failure status is kept so the caller can tell.
    double acc = opts.accuracy;
    for (int attempt = 0; attempt < 6; ++attempt) {
        acc *= 10.0;
        DaviesResult retry = DaviesIntegrator(dist.lambdas(), q, opts.max_terms).run(acc);
        if (retry.status == DaviesStatus::ok) {
            retry.status = first.status;
            retry.achieved_accuracy = acc;
            return retry;
        }
    }
    first.p = std::numeric_limits<double>::quiet_NaN();
    first.achieved_accuracy = std::numeric_limits<double>::infinity();
    return first;
}

}  // namespace seagle
