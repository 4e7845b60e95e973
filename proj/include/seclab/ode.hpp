#pragma once

// Explicit Runge-Kutta of order 8(5,3) with 7th-order dense output
// (Dormand-Prince coefficients as tabulated by Hairer and Wanner).

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace seclab {

using OdeRhs = std::function<void(double t, const double* y, double* dy)>;

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Dop853 {
public:
    Dop853(OdeRhs rhs, int n, double rtol, double atol)
        : f_(std::move(rhs)), n_(n), rtol_(rtol), atol_(atol)
    {
        for (auto* v : {&y_, &ynew_, &yold_, &tmp_, &k1_, &k1old_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &k8_,
                        &k9_, &k10_, &k11_, &k12_, &kb_, &fnew_, &s14_, &s15_, &s16_})
            v->assign(n_, 0.0);
        for (auto& r : rc_) r.assign(n_, 0.0);
    }

    /// Switches to fixed steps of size h (no error control).
    void set_fixed_step(double h)
    {
        fixed_ = h > 0.0;
        hfix_ = h;
    }
    void set_max_step(double h) { hmax_ = h; }

    void init(double t0, const double* y0)
    {
        t_ = told_ = t0;
        std::copy(y0, y0 + n_, y_.begin());
        yold_ = y_;
        f_(t_, y_.data(), k1_.data());
        ++nfev_;
        h_ = fixed_ ? hfix_ : initial_step();
        dense_ok_ = false;
        have_step_ = false;
    }

    /// Replaces the state at the current time; the step size is kept.
    void reset_state(const double* y)
    {
        std::copy(y, y + n_, y_.begin());
        f_(t_, y_.data(), k1_.data());
        ++nfev_;
        dense_ok_ = false;
        have_step_ = false;
    }

    /// Takes one accepted step, never past t_max. Returns the new time.
    double step(double t_max)
    {
        if (!(t_max > t_)) throw std::invalid_argument("Dop853::step: t_max must exceed current time");
        double h = fixed_ ? hfix_ : h_;
        if (hmax_ > 0.0) h = std::min(h, hmax_);
        bool last = false;
        if (t_ + 1.01 * h >= t_max) {
            h = t_max - t_;
            last = true;
        }
        const double facc1 = 1.0 / fac1_, facc2 = 1.0 / fac2_;
        bool reject = false;
        for (int iter = 0;; ++iter) {
            if (iter > 100000) throw IntegrationError("Dop853: too many rejected steps");
            if (0.1 * std::abs(h) <= std::abs(t_) * 2.3e-16)
                throw IntegrationError("Dop853: step size underflow");
            stages(h);
            if (fixed_) break;
            const double err = std::abs(h) * error_estimate();
            const double fac11 = std::pow(err, 1.0 / 8.0);
            double fac = std::max(facc2, std::min(facc1, fac11 / safe_));
            double hnew = h / fac;
            if (err <= 1.0) {
                if (hmax_ > 0.0) hnew = std::min(hnew, hmax_);
                if (reject) hnew = std::min(hnew, h);
                if (!last || hnew > h_) h_ = hnew;
                break;
            }
            hnew = h / std::min(facc1, fac11 / safe_);
            reject = true;
            last = false;
            h = hnew;
            if (t_ + h >= t_max) {
                h = t_max - t_;
                last = true;
            }
        }
        f_(t_ + h, ynew_.data(), fnew_.data());
        ++nfev_;
        ++nstep_;
        told_ = t_;
        hlast_ = h;
        yold_.swap(y_);
        y_.swap(ynew_);
        k1old_.swap(k1_);
        k1_ = fnew_;
        t_ = last ? t_max : t_ + h;
        dense_ok_ = false;
        have_step_ = true;
        return t_;
    }

    double t() const { return t_; }
    double t_prev() const { return told_; }
    const std::vector<double>& y() const { return y_; }
    const std::vector<double>& y_prev() const { return yold_; }
    /// Derivative at the current point.
    const std::vector<double>& dy() const { return k1_; }
    int dim() const { return n_; }
    long evaluations() const { return nfev_; }
    long steps() const { return nstep_; }

    /// Dense output on [t_prev, t] of the last step.
    void dense(double ti, double* out)
    {
        prepare_dense();
        const double s = (ti - told_) / hlast_, s1 = 1.0 - s;
        for (int i = 0; i < n_; ++i)
            out[i] = rc_[0][i] + s * (rc_[1][i] + s1 * (rc_[2][i] + s * (rc_[3][i] + s1 * (rc_[4][i] + s * (rc_[5][i] + s1 * (rc_[6][i] + s * rc_[7][i]))))));
    }

    double dense_component(int i, double ti)
    {
        prepare_dense();
        const double s = (ti - told_) / hlast_, s1 = 1.0 - s;
        return rc_[0][i] + s * (rc_[1][i] + s1 * (rc_[2][i] + s * (rc_[3][i] + s1 * (rc_[4][i] + s * (rc_[5][i] + s1 * (rc_[6][i] + s * rc_[7][i]))))));
    }

    /// Copies the 8 n dense coefficients of the last step.
    void dense_coefficients(std::vector<double>& out)
    {
        prepare_dense();
        out.resize(8 * static_cast<size_t>(n_));
        for (int j = 0; j < 8; ++j) std::copy(rc_[j].begin(), rc_[j].end(), out.begin() + j * n_);
    }

    double last_step() const { return hlast_; }

private:
    double initial_step()
    {
        double dnf = 0.0, dny = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double sk = atol_ + rtol_ * std::abs(y_[i]);
            dnf += (k1_[i] / sk) * (k1_[i] / sk);
            dny += (y_[i] / sk) * (y_[i] / sk);
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
        if (hmax_ > 0.0) h = std::min(h, hmax_);
        for (int i = 0; i < n_; ++i) tmp_[i] = y_[i] + h * k1_[i];
        f_(t_ + h, tmp_.data(), k2_.data());
        ++nfev_;
        double der2 = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double sq = (k2_[i] - k1_[i]) / (atol_ + rtol_ * std::abs(y_[i]));
            der2 += sq * sq;
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.125);
        double out = std::min(100.0 * h, h1);
        if (hmax_ > 0.0) out = std::min(out, hmax_);
        return out;
    }

    void stages(double h)
    {
        constexpr double c2 = 0.526001519587677318785587544488E-01, c3 = 0.789002279381515978178381316732E-01,
                         c4 = 0.118350341907227396726757197510E+00, c5 = 0.281649658092772603273242802490E+00,
                         c6 = 0.333333333333333333333333333333E+00, c7 = 0.25E+00,
                         c8 = 0.307692307692307692307692307692E+00, c9 = 0.651282051282051282051282051282E+00,
                         c10 = 0.6E+00, c11 = 0.857142857142857142857142857142E+00;
        constexpr double b1 = 5.42937341165687622380535766363E-2, b6 = 4.45031289275240888144113950566E0,
                         b7 = 1.89151789931450038304281599044E0, b8 = -5.8012039600105847814672114227E0,
                         b9 = 3.1116436695781989440891606237E-1, b10 = -1.52160949662516078556178806805E-1,
                         b11 = 2.01365400804030348374776537501E-1, b12 = 4.47106157277725905176885569043E-2;
        constexpr double a21 = 5.26001519587677318785587544488E-2, a31 = 1.97250569845378994544595329183E-2,
                         a32 = 5.91751709536136983633785987549E-2, a41 = 2.95875854768068491816892993775E-2,
                         a43 = 8.87627564304205475450678981324E-2, a51 = 2.41365134159266685502369798665E-1,
                         a53 = -8.84549479328286085344864962717E-1, a54 = 9.24834003261792003115737966543E-1,
                         a61 = 3.7037037037037037037037037037E-2, a64 = 1.70828608729473871279604482173E-1,
                         a65 = 1.25467687566822425016691814123E-1, a71 = 3.7109375E-2,
                         a74 = 1.70252211019544039314978060272E-1, a75 = 6.02165389804559606850219397283E-2,
                         a76 = -1.7578125E-2;
        constexpr double a81 = 3.70920001185047927108779319836E-2, a84 = 1.70383925712239993810214054705E-1,
                         a85 = 1.07262030446373284651809199168E-1, a86 = -1.53194377486244017527936158236E-2,
                         a87 = 8.27378916381402288758473766002E-3, a91 = 6.24110958716075717114429577812E-1,
                         a94 = -3.36089262944694129406857109825E0, a95 = -8.68219346841726006818189891453E-1,
                         a96 = 2.75920996994467083049415600797E1, a97 = 2.01540675504778934086186788979E1,
                         a98 = -4.34898841810699588477366255144E1, a101 = 4.77662536438264365890433908527E-1,
                         a104 = -2.48811461997166764192642586468E0, a105 = -5.90290826836842996371446475743E-1,
                         a106 = 2.12300514481811942347288949897E1, a107 = 1.52792336328824235832596922938E1,
                         a108 = -3.32882109689848629194453265587E1, a109 = -2.03312017085086261358222928593E-2;
        constexpr double a111 = -9.3714243008598732571704021658E-1, a114 = 5.18637242884406370830023853209E0,
                         a115 = 1.09143734899672957818500254654E0, a116 = -8.14978701074692612513997267357E0,
                         a117 = -1.85200656599969598641566180701E1, a118 = 2.27394870993505042818970056734E1,
                         a119 = 2.49360555267965238987089396762E0, a1110 = -3.0467644718982195003823669022E0,
                         a121 = 2.27331014751653820792359768449E0, a124 = -1.05344954667372501984066689879E1,
                         a125 = -2.00087205822486249909675718444E0, a126 = -1.79589318631187989172765950534E1,
                         a127 = 2.79488845294199600508499808837E1, a128 = -2.85899827713502369474065508674E0,
                         a129 = -8.87285693353062954433549289258E0, a1210 = 1.23605671757943030647266201528E1,
                         a1211 = 6.43392746015763530355970484046E-1;
        const double t = t_;
        const auto& y = y_;
        auto& w = tmp_;
        const int n = n_;
        for (int i = 0; i < n; ++i) w[i] = y[i] + h * a21 * k1_[i];
        f_(t + c2 * h, w.data(), k2_.data());
        for (int i = 0; i < n; ++i) w[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
        f_(t + c3 * h, w.data(), k3_.data());
        for (int i = 0; i < n; ++i) w[i] = y[i] + h * (a41 * k1_[i] + a43 * k3_[i]);
        f_(t + c4 * h, w.data(), k4_.data());
        for (int i = 0; i < n; ++i) w[i] = y[i] + h * (a51 * k1_[i] + a53 * k3_[i] + a54 * k4_[i]);
        f_(t + c5 * h, w.data(), k5_.data());
        for (int i = 0; i < n; ++i) w[i] = y[i] + h * (a61 * k1_[i] + a64 * k4_[i] + a65 * k5_[i]);
        f_(t + c6 * h, w.data(), k6_.data());
        for (int i = 0; i < n; ++i) w[i] = y[i] + h * (a71 * k1_[i] + a74 * k4_[i] + a75 * k5_[i] + a76 * k6_[i]);
        f_(t + c7 * h, w.data(), k7_.data());
        for (int i = 0; i < n; ++i)
            w[i] = y[i] + h * (a81 * k1_[i] + a84 * k4_[i] + a85 * k5_[i] + a86 * k6_[i] + a87 * k7_[i]);
        f_(t + c8 * h, w.data(), k8_.data());
        for (int i = 0; i < n; ++i)
            w[i] = y[i] + h * (a91 * k1_[i] + a94 * k4_[i] + a95 * k5_[i] + a96 * k6_[i] + a97 * k7_[i] + a98 * k8_[i]);
        f_(t + c9 * h, w.data(), k9_.data());
        for (int i = 0; i < n; ++i)
            w[i] = y[i] + h * (a101 * k1_[i] + a104 * k4_[i] + a105 * k5_[i] + a106 * k6_[i] + a107 * k7_[i] +
                               a108 * k8_[i] + a109 * k9_[i]);
        f_(t + c10 * h, w.data(), k10_.data());
        for (int i = 0; i < n; ++i)
            w[i] = y[i] + h * (a111 * k1_[i] + a114 * k4_[i] + a115 * k5_[i] + a116 * k6_[i] + a117 * k7_[i] +
                               a118 * k8_[i] + a119 * k9_[i] + a1110 * k10_[i]);
        f_(t + c11 * h, w.data(), k11_.data());
        for (int i = 0; i < n; ++i)
            w[i] = y[i] + h * (a121 * k1_[i] + a124 * k4_[i] + a125 * k5_[i] + a126 * k6_[i] + a127 * k7_[i] +
                               a128 * k8_[i] + a129 * k9_[i] + a1210 * k10_[i] + a1211 * k11_[i]);
        f_(t + h, w.data(), k12_.data());
        nfev_ += 11;
        for (int i = 0; i < n; ++i) {
            kb_[i] = b1 * k1_[i] + b6 * k6_[i] + b7 * k7_[i] + b8 * k8_[i] + b9 * k9_[i] + b10 * k10_[i] +
                     b11 * k11_[i] + b12 * k12_[i];
            ynew_[i] = y[i] + h * kb_[i];
        }
    }

    double error_estimate() const
    {
        constexpr double bhh1 = 0.244094488188976377952755905512E+00, bhh2 = 0.733846688281611857341361741547E+00,
                         bhh3 = 0.220588235294117647058823529412E-01;
        constexpr double er1 = 0.1312004499419488073250102996E-01, er6 = -0.1225156446376204440720569753E+01,
                         er7 = -0.4957589496572501915214079952E+00, er8 = 0.1664377182454986536961530415E+01,
                         er9 = -0.3503288487499736816886487290E+00, er10 = 0.3341791187130174790297318841E+00,
                         er11 = 0.8192320648511571246570742613E-01, er12 = -0.2235530786388629525884427845E-01;
        double err = 0.0, err2 = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double sk = 1.0 / (atol_ + rtol_ * std::max(std::abs(y_[i]), std::abs(ynew_[i])));
            double sq = (kb_[i] - bhh1 * k1_[i] - bhh2 * k9_[i] - bhh3 * k12_[i]) * sk;
            err2 += sq * sq;
            sq = (er1 * k1_[i] + er6 * k6_[i] + er7 * k7_[i] + er8 * k8_[i] + er9 * k9_[i] + er10 * k10_[i] +
                  er11 * k11_[i] + er12 * k12_[i]) * sk;
            err += sq * sq;
        }
        double deno = err + 0.01 * err2;
        if (deno <= 0.0) deno = 1.0;
        return err / std::sqrt(deno * n_);
    }

    void prepare_dense()
    {
        if (!have_step_) throw std::logic_error("Dop853::dense: no accepted step");
        if (dense_ok_) return;
        constexpr double c14 = 0.1E+00, c15 = 0.2E+00, c16 = 0.777777777777777777777777777778E+00;
        constexpr double a141 = 5.61675022830479523392909219681E-2, a147 = 2.53500210216624811088794765333E-1,
                         a148 = -2.46239037470802489917441475441E-1, a149 = -1.24191423263816360469010140626E-1,
                         a1410 = 1.5329179827876569731206322685E-1, a1411 = 8.20105229563468988491666602057E-3,
                         a1412 = 7.56789766054569976138603589584E-3, a1413 = -8.298E-3;
        constexpr double a151 = 3.18346481635021405060768473261E-2, a156 = 2.83009096723667755288322961402E-2,
                         a157 = 5.35419883074385676223797384372E-2, a158 = -5.49237485713909884646569340306E-2,
                         a1511 = -1.08347328697249322858509316994E-4, a1512 = 3.82571090835658412954920192323E-4,
                         a1513 = -3.40465008687404560802977114492E-4, a1514 = 1.41312443674632500278074618366E-1;
        constexpr double a161 = -4.28896301583791923408573538692E-1, a166 = -4.69762141536116384314449447206E0,
                         a167 = 7.68342119606259904184240953878E0, a168 = 4.06898981839711007970213554331E0,
                         a169 = 3.56727187455281109270669543021E-1, a1613 = -1.39902416515901462129418009734E-3,
                         a1614 = 2.9475147891527723389556272149E0, a1615 = -9.15095847217987001081870187138E0;
        constexpr double d41 = -0.84289382761090128651353491142E+01, d46 = 0.56671495351937776962531783590E+00,
                         d47 = -0.30689499459498916912797304727E+01, d48 = 0.23846676565120698287728149680E+01,
                         d49 = 0.21170345824450282767155149946E+01, d410 = -0.87139158377797299206789907490E+00,
                         d411 = 0.22404374302607882758541771650E+01, d412 = 0.63157877876946881815570249290E+00,
                         d413 = -0.88990336451333310820698117400E-01, d414 = 0.18148505520854727256656404962E+02,
                         d415 = -0.91946323924783554000451984436E+01, d416 = -0.44360363875948939664310572000E+01;
        constexpr double d51 = 0.10427508642579134603413151009E+02, d56 = 0.24228349177525818288430175319E+03,
                         d57 = 0.16520045171727028198505394887E+03, d58 = -0.37454675472269020279518312152E+03,
                         d59 = -0.22113666853125306036270938578E+02, d510 = 0.77334326684722638389603898808E+01,
                         d511 = -0.30674084731089398182061213626E+02, d512 = -0.93321305264302278729567221706E+01,
                         d513 = 0.15697238121770843886131091075E+02, d514 = -0.31139403219565177677282850411E+02,
                         d515 = -0.93529243588444783865713862664E+01, d516 = 0.35816841486394083752465898540E+02;
        constexpr double d61 = 0.19985053242002433820987653617E+02, d66 = -0.38703730874935176555105901742E+03,
                         d67 = -0.18917813819516756882830838328E+03, d68 = 0.52780815920542364900561016686E+03,
                         d69 = -0.11573902539959630126141871134E+02, d610 = 0.68812326946963000169666922661E+01,
                         d611 = -0.10006050966910838403183860980E+01, d612 = 0.77771377980534432092869265740E+00,
                         d613 = -0.27782057523535084065932004339E+01, d614 = -0.60196695231264120758267380846E+02,
                         d615 = 0.84320405506677161018159903784E+02, d616 = 0.11992291136182789328035130030E+02;
        constexpr double d71 = -0.25693933462703749003312586129E+02, d76 = -0.15418974869023643374053993627E+03,
                         d77 = -0.23152937917604549567536039109E+03, d78 = 0.35763911791061412378285349910E+03,
                         d79 = 0.93405324183624310003907691704E+02, d710 = -0.37458323136451633156875139351E+02,
                         d711 = 0.10409964950896230045147246184E+03, d712 = 0.29840293426660503123344363579E+02,
                         d713 = -0.43533456590011143754432175058E+02, d714 = 0.96324553959188282948394950600E+02,
                         d715 = -0.39177261675615439165231486172E+02, d716 = -0.14972683625798562581422125276E+03;
        const int n = n_;
        const double h = hlast_;
        const auto& k1 = k1old_;
        const auto& fn = k1_; // derivative at the new point
        for (int i = 0; i < n; ++i) {
            rc_[0][i] = yold_[i];
            const double ydiff = y_[i] - yold_[i];
            rc_[1][i] = ydiff;
            const double bspl = h * k1[i] - ydiff;
            rc_[2][i] = bspl;
            rc_[3][i] = ydiff - h * fn[i] - bspl;
            rc_[4][i] = d41 * k1[i] + d46 * k6_[i] + d47 * k7_[i] + d48 * k8_[i] + d49 * k9_[i] + d410 * k10_[i] +
                        d411 * k11_[i] + d412 * k12_[i];
            rc_[5][i] = d51 * k1[i] + d56 * k6_[i] + d57 * k7_[i] + d58 * k8_[i] + d59 * k9_[i] + d510 * k10_[i] +
                        d511 * k11_[i] + d512 * k12_[i];
            rc_[6][i] = d61 * k1[i] + d66 * k6_[i] + d67 * k7_[i] + d68 * k8_[i] + d69 * k9_[i] + d610 * k10_[i] +
                        d611 * k11_[i] + d612 * k12_[i];
            rc_[7][i] = d71 * k1[i] + d76 * k6_[i] + d77 * k7_[i] + d78 * k8_[i] + d79 * k9_[i] + d710 * k10_[i] +
                        d711 * k11_[i] + d712 * k12_[i];
        }
        auto& w = tmp_;
        for (int i = 0; i < n; ++i)
            w[i] = yold_[i] + h * (a141 * k1[i] + a147 * k7_[i] + a148 * k8_[i] + a149 * k9_[i] + a1410 * k10_[i] +
                                   a1411 * k11_[i] + a1412 * k12_[i] + a1413 * fn[i]);
        f_(told_ + c14 * h, w.data(), s14_.data());
        for (int i = 0; i < n; ++i)
            w[i] = yold_[i] + h * (a151 * k1[i] + a156 * k6_[i] + a157 * k7_[i] + a158 * k8_[i] + a1511 * k11_[i] +
                                   a1512 * k12_[i] + a1513 * fn[i] + a1514 * s14_[i]);
        f_(told_ + c15 * h, w.data(), s15_.data());
        for (int i = 0; i < n; ++i)
            w[i] = yold_[i] + h * (a161 * k1[i] + a166 * k6_[i] + a167 * k7_[i] + a168 * k8_[i] + a169 * k9_[i] +
                                   a1613 * fn[i] + a1614 * s14_[i] + a1615 * s15_[i]);
        f_(told_ + c16 * h, w.data(), s16_.data());
        nfev_ += 3;
        for (int i = 0; i < n; ++i) {
            rc_[4][i] = h * (rc_[4][i] + d413 * fn[i] + d414 * s14_[i] + d415 * s15_[i] + d416 * s16_[i]);
            rc_[5][i] = h * (rc_[5][i] + d513 * fn[i] + d514 * s14_[i] + d515 * s15_[i] + d516 * s16_[i]);
            rc_[6][i] = h * (rc_[6][i] + d613 * fn[i] + d614 * s14_[i] + d615 * s15_[i] + d616 * s16_[i]);
            rc_[7][i] = h * (rc_[7][i] + d713 * fn[i] + d714 * s14_[i] + d715 * s15_[i] + d716 * s16_[i]);
        }
        dense_ok_ = true;
    }

    OdeRhs f_;
    int n_;
    double rtol_, atol_;
    double fac1_ = 0.333, fac2_ = 6.0, safe_ = 0.9;
    double hmax_ = 0.0;
    bool fixed_ = false;
    double hfix_ = 0.0;
    double t_ = 0.0, told_ = 0.0, h_ = 0.0, hlast_ = 0.0;
    bool dense_ok_ = false, have_step_ = false;
    long nfev_ = 0, nstep_ = 0;
    std::vector<double> y_, ynew_, yold_, tmp_;
    std::vector<double> k1_, k1old_, k2_, k3_, k4_, k5_, k6_, k7_, k8_, k9_, k10_, k11_, k12_, kb_, fnew_;
    std::vector<double> s14_, s15_, s16_;
    std::vector<double> rc_[8];
};

/// Gauss-Legendre nodes and weights on [0, 1].
struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n)
    {
        x.resize(n);
        w.resize(n);
        const double pi = std::acos(-1.0);
        for (int i = 0; i < n; ++i) {
            double z = std::cos(pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            x[i] = 0.5 * (1.0 - z);
            w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

} // namespace seclab
