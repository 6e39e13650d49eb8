// exploration harness (not installed)
#include <cstdio>
#include <string>

#include "snnlab/attacks.hpp"
#include "snnlab/dataset.hpp"
#include "snnlab/metrics.hpp"
#include "snnlab/train.hpp"

using namespace snnlab;

namespace {

std::vector<LayerSpec> fc_stack(int side, int classes) {
    return {LayerSpec::make_flatten(), LayerSpec::make_fc(side * side, 32),
            LayerSpec::make_batchnorm(32), LayerSpec::make_lif(),
            LayerSpec::make_fc(32, 24), LayerSpec::make_batchnorm(24), LayerSpec::make_lif(),
            LayerSpec::make_fc(24, classes)};
}

Model make_model(int side, int classes, CodingScheme scheme, double sigma2, std::uint64_t seed) {
    CodingConfig cc;
    cc.scheme = scheme;
    cc.T = default_timesteps(scheme);
    cc.sigma2 = sigma2;
    cc.seed = rng::derive_key(seed, 0xc0de);
    return Model(Network({1, 8, 8}, fc_stack(8, classes), LifParams{}, seed), cc);
}

}  // namespace

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "stripes";

    if (mode == "stripes") {
        auto data = generate_synthetic(SyntheticKind::stripes, 160, 8, 2, 1);
        auto model = make_model(8, 2, CodingScheme::direct, 0.0, 11);
        TrainConfig tc;
        tc.epochs = 60;
                tc.lr_schedule = LrSchedule::cosine;
        tc.seed = 5;
        auto hist = train(model, data, tc);
        for (std::size_t i = 0; i < hist.size(); i += 5)
            std::printf("epoch %d loss %.4f acc %.3f\n", hist[i].epoch, hist[i].loss,
                        hist[i].train_accuracy);
        EvalOptions eo;
        std::printf("final eval acc: %.3f\n",
                    evaluate_accuracy(model, data.images, data.labels, eo));
        // teacher
        TrainConfig ttc;
        ttc.epochs = 60;
                tc.lr_schedule = LrSchedule::cosine;
        ttc.seed = 6;
        auto teacher = train_teacher_ann({1, 8, 8}, fc_stack(8, 2), LifParams{}, data, ttc, 21);
        std::printf("teacher acc: %.3f\n",
                    evaluate_accuracy(teacher, data.images, data.labels, eo));
    }

    if (mode == "ersct") {
        const int classes = 4;
        auto train_set = generate_synthetic(SyntheticKind::blobs, 400, 8, classes, 2);
        auto test_set = generate_synthetic(SyntheticKind::blobs, 256, 8, classes, 3);
        for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
            TrainConfig ttc;
            ttc.epochs = 40;
            ttc.lr_schedule = LrSchedule::cosine;
            ttc.seed = rng::derive_key(s, 0x66);
            auto teacher = train_teacher_ann({1, 8, 8}, fc_stack(8, classes), LifParams{},
                                             train_set, ttc, rng::derive_key(s, 0x77));
            EvalOptions eo;
            eo.seed = rng::derive_key(s, 0x33);
            const double teach_acc = evaluate_accuracy(teacher, test_set.images, test_set.labels, eo);

            double accs[2];
            int slot = 0;
            for (LossMode lm : {LossMode::ce_mean, LossMode::e_rsct}) {
                auto model = make_model(8, classes, CodingScheme::rsc1, 0.005, rng::derive_key(s, 0x11));
                TrainConfig tc;
                tc.epochs = 60;
                tc.lr_schedule = LrSchedule::cosine;
                tc.seed = rng::derive_key(s, 0x22);
                tc.loss_mode = lm;
                train(model, train_set, tc, lm == LossMode::e_rsct ? &teacher : nullptr);
                accs[slot++] = evaluate_accuracy(model, test_set.images, test_set.labels, eo);
            }
            std::printf("seed %llu teacher %.3f plain %.3f ersct %.3f\n",
                        static_cast<unsigned long long>(s), teach_acc, accs[0], accs[1]);
        }
    }

    if (mode == "eot") {
        const int classes = 4;
        auto train_set = generate_synthetic(SyntheticKind::blobs, 400, 8, classes, 2);
        auto test_set = generate_synthetic(SyntheticKind::blobs, 256, 8, classes, 3);
        for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
            auto model = make_model(8, classes, CodingScheme::rsc1, 0.005, rng::derive_key(s, 0x11));
            TrainConfig tc;
            tc.epochs = 60;
            tc.lr_schedule = LrSchedule::cosine;
            tc.seed = rng::derive_key(s, 0x22);
            train(model, train_set, tc);
            EvalOptions eo;
            eo.seed = rng::derive_key(s, 0x33);
            AttackConfig pg;
            pg.family = AttackFamily::pgd;
            pg.seed = rng::derive_key(s, 0x44);
            auto adv = pgd(model, test_set.images, test_set.labels, pg);
            const double r_pgd = evaluate_accuracy(model, adv.adversarials, test_set.labels, eo);
            AttackConfig ec = pg;
            ec.family = AttackFamily::eotpgd;
            ec.eot_samples = 8;
            auto eadv = eot_pgd(model, test_set.images, test_set.labels, ec);
            const double r_eot = evaluate_accuracy(model, eadv.adversarials, test_set.labels, eo);
            std::printf("seed %llu pgd %.3f eotpgd %.3f\n",
                        static_cast<unsigned long long>(s), r_pgd, r_eot);
        }
    }

    if (mode == "checklist") {
        const int classes = 4;
        auto train_set = generate_synthetic(SyntheticKind::blobs, 400, 8, classes, 2);
        auto test_set = generate_synthetic(SyntheticKind::blobs, 256, 8, classes, 3);
        auto model = make_model(8, classes, CodingScheme::rsc1, 0.005, rng::derive_key(1, 0x11));
        auto sibling = make_model(8, classes, CodingScheme::rsc1, 0.005, rng::derive_key(1, 0x55));
        TrainConfig tc;
        tc.epochs = 60;
        tc.lr_schedule = LrSchedule::cosine;
        tc.seed = rng::derive_key(1, 0x22);
        train(model, train_set, tc);
        TrainConfig tc2 = tc;
        tc2.seed = rng::derive_key(1, 0x56);
        train(sibling, train_set, tc2);
        auto rep = obfuscation_checklist(model, sibling, test_set, 77);
        for (const auto& item : rep.items)
            std::printf("(%d) %-55s %s | %s\n", item.id, item.claim.c_str(),
                        item.pass ? "pass" : "FAIL", item.evidence.c_str());
        for (const auto& p : rep.sweep) std::printf("  eta %5.1f acc %.3f\n", p.eta, p.accuracy);
    }

    if (mode == "curve") {
        const int classes = 4;
        auto train_set = generate_synthetic(SyntheticKind::blobs, 400, 8, classes, 2);
        auto test_set = generate_synthetic(SyntheticKind::blobs, 200, 8, classes, 3);
        for (double s2 : {0.0, 0.0005, 0.001, 0.002, 0.003, 0.005, 0.008}) {
            double cs = 0, rs = 0;
            for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
                auto model = make_model(8, classes, s2 == 0.0 ? CodingScheme::direct : CodingScheme::rsc1,
                                        s2, rng::derive_key(s, 0x11));
                TrainConfig tc;
                tc.epochs = 60;
                tc.lr_schedule = LrSchedule::cosine;
                tc.seed = rng::derive_key(s, 0x22);
                train(model, train_set, tc);
                EvalOptions eo;
                eo.seed = rng::derive_key(s, 0x33);
                cs += evaluate_accuracy(model, test_set.images, test_set.labels, eo);
                AttackConfig pg;
                pg.family = AttackFamily::pgd;
                pg.seed = rng::derive_key(s, 0x44);
                auto adv = pgd(model, test_set.images, test_set.labels, pg);
                rs += evaluate_accuracy(model, adv.adversarials, test_set.labels, eo);
            }
            std::printf("sigma2 %.3f clean %.3f pgd %.3f\n", s2, cs / 3, rs / 3);
        }
        // poisson reference
        double cs = 0, rs = 0;
        for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
            auto model = make_model(8, classes, CodingScheme::poisson, 0.0, rng::derive_key(s, 0x11));
            TrainConfig tc;
            tc.epochs = 60;
            tc.lr_schedule = LrSchedule::cosine;
            tc.seed = rng::derive_key(s, 0x22);
            train(model, train_set, tc);
            EvalOptions eo;
            eo.seed = rng::derive_key(s, 0x33);
            cs += evaluate_accuracy(model, test_set.images, test_set.labels, eo);
            AttackConfig pg;
            pg.family = AttackFamily::pgd;
            pg.seed = rng::derive_key(s, 0x44);
            auto adv = pgd(model, test_set.images, test_set.labels, pg);
            rs += evaluate_accuracy(model, adv.adversarials, test_set.labels, eo);
        }
        std::printf("poisson    clean %.3f pgd %.3f\n", cs / 3, rs / 3);
    }

    if (mode == "trend") {
        const int classes = 4;
        auto train_set = generate_synthetic(SyntheticKind::blobs, 400, 8, classes, 2);
        auto test_set = generate_synthetic(SyntheticKind::blobs, 256, 8, classes, 3);
        for (std::uint64_t s : {1ULL, 2ULL, 3ULL}) {
            std::printf("== seed %llu\n", static_cast<unsigned long long>(s));
            struct Cfg { const char* name; CodingScheme sch; double s2; };
            for (auto [name, sch, s2] : {Cfg{"direct", CodingScheme::direct, 0.0},
                                         Cfg{"poisson", CodingScheme::poisson, 0.0},
                                         Cfg{"rsc-lo", CodingScheme::rsc1, 0.003},
                                         Cfg{"rsc-hi", CodingScheme::rsc1, 0.005}}) {
                auto model = make_model(8, classes, sch, s2, rng::derive_key(s, 0x11));
                TrainConfig tc;
                tc.epochs = 60;
                tc.lr_schedule = LrSchedule::cosine;
                tc.seed = rng::derive_key(s, 0x22);
                auto hist = train(model, tc.epochs ? train_set : train_set, tc);
                EvalOptions eo;
                eo.seed = rng::derive_key(s, 0x33);
                const double clean = evaluate_accuracy(model, test_set.images, test_set.labels, eo);
                AttackConfig pg;
                pg.family = AttackFamily::pgd;
                pg.seed = rng::derive_key(s, 0x44);
                auto adv = pgd(model, test_set.images, test_set.labels, pg);
                const double racc = evaluate_accuracy(model, adv.adversarials, test_set.labels, eo);
                std::printf("  %-8s clean %.3f pgd %.3f (train acc %.3f)\n", name, clean, racc,
                            hist.back().train_accuracy);
            }
        }
    }
    return 0;
}
