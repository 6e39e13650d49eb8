#include "snnlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "snnlab/error.hpp"
#include "snnlab/ops.hpp"

namespace snnlab {

double qte(const QtePoint& a, const QtePoint& b) {
    return std::abs((b.eta - a.eta) * (b.accuracy + a.accuracy) / 2.0);
}

double qte_curve(std::span<const QtePoint> points) {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) total += qte(points[i - 1], points[i]);
    return total;
}

double evaluate_accuracy(Model& model, const Tensor& x, const std::vector<int>& y,
                         const EvalOptions& opts) {
    if (opts.n_eval_noise < 1) throw ContractError("n_eval_noise must be >= 1");
    const std::int64_t n = x.dim(0);
    const std::int64_t k = model.net.class_count();

    std::vector<int> pred(static_cast<std::size_t>(n));
    if (!opts.majority_vote) {
        Tensor acc({n, k});
        for (int draw = 0; draw < opts.n_eval_noise; ++draw) {
            const std::uint64_t nonce = rng::derive_key(opts.seed, 0xe7a1, static_cast<std::uint64_t>(draw));
            Tensor lg = model.logits(x, nonce, false);
            for (std::int64_t i = 0; i < acc.numel(); ++i) acc[i] += lg[i];
        }
        pred = argmax_rows(acc);
    } else {
        std::vector<std::vector<int>> votes(static_cast<std::size_t>(n),
                                            std::vector<int>(static_cast<std::size_t>(k), 0));
        for (int draw = 0; draw < opts.n_eval_noise; ++draw) {
            const std::uint64_t nonce = rng::derive_key(opts.seed, 0xe7a1, static_cast<std::uint64_t>(draw));
            const auto p = model.predict(x, nonce);
            for (std::int64_t i = 0; i < n; ++i)
                ++votes[static_cast<std::size_t>(i)][static_cast<std::size_t>(p[static_cast<std::size_t>(i)])];
        }
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& v = votes[static_cast<std::size_t>(i)];
            pred[static_cast<std::size_t>(i)] =
                static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
        }
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (pred[i] == y[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

RobustnessReport evaluate(Model& model, const Dataset& data,
                          std::span<const AttackConfig> attacks, const EvalOptions& opts) {
    if (data.size() == 0) throw ContractError("empty dataset");
    RobustnessReport rep;
    rep.coding_scheme = model.ann ? "ann" : coding_scheme_name(model.coder.config().scheme);
    rep.sigma2 = model.coder.config().sigma2;
    rep.T = model.timesteps();
    rep.n_eval_noise = opts.n_eval_noise;
    rep.n_samples = data.size();

    rep.clean_accuracy = evaluate_accuracy(model, data.images, data.labels, opts);

    std::optional<AttackOutcome> first_fgsm, first_pgd;
    for (const auto& cfg : attacks) {
        AdversarialBatch adv = run_attack(model, data.images, data.labels, cfg);
        AttackOutcome out;
        out.name = attack_family_name(cfg.family);
        out.config = cfg;
        out.accuracy = evaluate_accuracy(model, adv.adversarials, data.labels, opts);
        rep.attacks.push_back(out);
        if (cfg.family == AttackFamily::fgsm && !first_fgsm) first_fgsm = out;
        if (cfg.family == AttackFamily::pgd && !first_pgd) first_pgd = out;
    }

    const QtePoint clean{0.0, rep.clean_accuracy};
    if (first_fgsm)
        rep.f_qte = qte(clean, {first_fgsm->config.epsilon * 255.0, first_fgsm->accuracy});
    if (first_pgd)
        rep.p_qte = qte(clean, {first_pgd->config.epsilon * 255.0, first_pgd->accuracy});
    return rep;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

ChecklistReport obfuscation_checklist(Model& model, Model& sibling, const Dataset& data,
                                      std::uint64_t seed) {
    ChecklistReport rep;
    EvalOptions opts;
    opts.seed = rng::derive_key(seed, 0xe5a1);

    AttackConfig base;
    base.epsilon = 8.0 / 255.0;
    base.seed = rng::derive_key(seed, 0xa77);

    AttackConfig fg = base;
    fg.family = AttackFamily::fgsm;
    AttackConfig pg = base;
    pg.family = AttackFamily::pgd;

    const double clean = evaluate_accuracy(model, data.images, data.labels, opts);
    AdversarialBatch fgsm_adv = fgsm(model, data.images, data.labels, fg);
    const double acc_fgsm = evaluate_accuracy(model, fgsm_adv.adversarials, data.labels, opts);
    AdversarialBatch pgd_adv = pgd(model, data.images, data.labels, pg);
    const double acc_pgd = evaluate_accuracy(model, pgd_adv.adversarials, data.labels, opts);

    // (1) one-step vs iterative
    rep.items[0] = {1, "one-step attack beats the iterative attack", acc_pgd <= acc_fgsm,
                    "fgsm acc " + fmt(acc_fgsm) + ", pgd acc " + fmt(acc_pgd)};

    // (2) black-box vs white-box (pgd crafted on the sibling)
    TransferResult tr = blackbox_transfer(sibling, model, data.images, data.labels, pg);
    rep.items[1] = {2, "black-box attack beats the white-box attack",
                    tr.transfer_accuracy >= acc_pgd,
                    "black-box acc " + fmt(tr.transfer_accuracy) + ", white-box acc " + fmt(acc_pgd)};

    // (3)/(4) intensity sweep
    const double chance = 1.0 / static_cast<double>(model.net.class_count());
    rep.sweep.push_back({0.0, clean});
    double prev = clean;
    bool monotone = true;
    double acc64 = clean;
    for (double eta : {2.0, 4.0, 6.0, 8.0, 16.0, 32.0, 64.0}) {
        AttackConfig sweep_cfg = pg;
        sweep_cfg.epsilon = eta / 255.0;
        AdversarialBatch adv = pgd(model, data.images, data.labels, sweep_cfg);
        const double acc = evaluate_accuracy(model, adv.adversarials, data.labels, opts);
        rep.sweep.push_back({eta, acc});
        if (acc > prev + 0.01) monotone = false;  // one point of statistical slack
        prev = acc;
        acc64 = acc;
    }
    rep.items[2] = {3, "unbounded attack fails to reach full success", acc64 <= chance + 0.05,
                    "acc at eta 64 is " + fmt(acc64) + ", chance " + fmt(chance)};
    rep.items[3] = {4, "larger budgets do not raise attack success", monotone,
                    "sweep accuracies non-increasing within 0.01"};

    // (5) random sampling inside the ball vs the gradient attack, on a subsample
    const std::int64_t sub_n = std::min<std::int64_t>(data.size(), 64);
    Dataset sub = data.head(sub_n);
    std::vector<char> random_hit(static_cast<std::size_t>(sub_n), 0);
    const int draws = 1000;
    rng::Stream st(rng::derive_key(seed, 0x5a3d));
    const std::uint64_t eval_nonce = rng::derive_key(seed, 0xe5a1, 0xff);
    for (int d = 0; d < draws; ++d) {
        Tensor probe = sub.images.clone();
        auto pv = probe.data();
        for (std::int64_t i = 0; i < probe.numel(); ++i)
            pv[i] = std::clamp(pv[i] + st.next_uniform(-base.epsilon, base.epsilon), 0.0, 1.0);
        const auto pred = model.predict(probe, eval_nonce);
        for (std::int64_t i = 0; i < sub_n; ++i)
            if (pred[static_cast<std::size_t>(i)] != sub.labels[static_cast<std::size_t>(i)])
                random_hit[static_cast<std::size_t>(i)] = 1;
    }
    double random_rate = 0.0;
    for (char h : random_hit) random_rate += h;
    random_rate /= static_cast<double>(sub_n);

    AdversarialBatch sub_fgsm = fgsm(model, sub.images, sub.labels, fg);
    const auto pred_fgsm = model.predict(sub_fgsm.adversarials, eval_nonce);
    double fgsm_rate = 0.0;
    for (std::int64_t i = 0; i < sub_n; ++i)
        if (pred_fgsm[static_cast<std::size_t>(i)] != sub.labels[static_cast<std::size_t>(i)])
            fgsm_rate += 1.0;
    fgsm_rate /= static_cast<double>(sub_n);

    rep.items[4] = {5, "random sampling finds adversarials the gradient attack misses",
                    random_rate <= fgsm_rate,
                    "random success " + fmt(random_rate) + ", fgsm success " + fmt(fgsm_rate)};

    rep.all_pass = true;
    for (const auto& item : rep.items) rep.all_pass = rep.all_pass && item.pass;
    return rep;
}

}  // namespace snnlab
