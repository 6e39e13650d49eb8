#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snnlab/dataset.hpp"
#include "snnlab/model.hpp"

namespace snnlab {

enum class LossMode { ce_mean, presynaptic, e_rsct };
enum class LrSchedule { constant, cosine };

std::string loss_mode_name(LossMode m);
LossMode loss_mode_from_name(const std::string& name);
std::string lr_schedule_name(LrSchedule s);
LrSchedule lr_schedule_from_name(const std::string& name);

struct AdvTrainSettings {
    double epsilon_train = 2.0 / 255.0;  // low-intensity fgsm budget
    bool mix_half = false;               // half clean / half adversarial instead of full replacement
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrSchedule lr_schedule = LrSchedule::constant;
    double lambda_kd = 0.1;
    LossMode loss_mode = LossMode::ce_mean;
    std::optional<AdvTrainSettings> adv_train;
    std::uint64_t seed = 0;  // drives init-independent run randomness: data order, noise nonces

    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;     // mean total loss over batches
    double loss_kd = 0.0;  // distillation component (e_rsct only)
    double loss_ps = 0.0;  // data-term component
    double train_accuracy = 0.0;
    double lr = 0.0;
};

// Minibatch SGD with momentum and weight decay:
//   v <- momentum * v + grad + weight_decay * theta
//   theta <- theta - lr * v
class Sgd {
public:
    Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
    void step(std::vector<Tensor>& params, double lr);

private:
    double momentum_, weight_decay_;
    std::vector<std::vector<double>> velocity_;
};

// One training run. e_rsct mode needs a frozen teacher (its clean-input
// logits are the distillation targets); fresh coding noise is drawn every
// batch; adv_train swaps the batch for fgsm adversarials crafted against the
// current parameters before the update. Aborts with NumericError if the
// loss goes non-finite.
std::vector<EpochMetrics> train(Model& model, const Dataset& data, const TrainConfig& cfg,
                                Model* teacher = nullptr);

// Same stack run as a plain ANN with cross-entropy, then frozen. The
// returned model has ann = true and ignores coding noise.
Model train_teacher_ann(Shape input_shape, std::vector<LayerSpec> layers, LifParams lif_params,
                        const Dataset& data, const TrainConfig& cfg, std::uint64_t init_seed);

}  // namespace snnlab
