#include "qks/model_gradcheck.hpp"

#include "qks/errors.hpp"

namespace qks {

GradCheckReport model_grad_check(const ModelGradCheckSpec& spec) {
    const ModelConfig& cfg = spec.config;
    cfg.validate();
    if (spec.n_labels == 0 || spec.n_positive > spec.n_labels) {
        throw DataError("model_grad_check: invalid label counts");
    }

    Rng rng(spec.seed);
    QksParameters<double> params = QksParameters<double>::init(cfg, rng);

    Tensor<double> raw({cfg.hw(), cfg.channels});
    for (auto& v : raw.values()) v = rng.normal();

    LabelEmbeddingTable<double> labels;
    labels.vectors = Tensor<double>({spec.n_labels, cfg.d});
    for (auto& v : labels.vectors.values()) v = rng.normal();
    labels.seen_mask.assign(spec.n_labels, 1);

    std::vector<std::size_t> positives(spec.n_positive);
    for (std::size_t i = 0; i < spec.n_positive; ++i) positives[i] = i;

    auto loss_of = [&]() {
        const ForwardResult<double> fwd = forward(raw, labels, params, cfg);
        const LossResult<double> loss =
            spec.loss_kind == LossKind::classification
                ? classification_loss(fwd.scores, positives, labels.seen_mask)
                : ranking_loss(fwd.scores, positives, labels.seen_mask);
        return loss.value;
    };

    // Analytic gradients at the unperturbed point.
    QksParameters<double> grads = QksParameters<double>::zeros_like(cfg);
    {
        const ForwardResult<double> fwd = forward(raw, labels, params, cfg);
        const LossResult<double> loss =
            spec.loss_kind == LossKind::classification
                ? classification_loss(fwd.scores, positives, labels.seen_mask)
                : ranking_loss(fwd.scores, positives, labels.seen_mask);
        backward(fwd.trace, fwd.scores, loss.d_scores, labels, params, cfg, grads);
    }

    std::vector<GradCheckParam> views;
    {
        std::vector<const Tensor<double>*> grad_ptrs;
        for_each_trainable<double>(std::as_const(grads), cfg,
                                   [&](const std::string&, const Tensor<double>& t) {
                                       grad_ptrs.push_back(&t);
                                   });
        std::size_t i = 0;
        for_each_trainable<double>(params, cfg, [&](const std::string& name, Tensor<double>& t) {
            views.push_back(GradCheckParam{name, &t, grad_ptrs[i++]});
        });
    }
    return grad_check(loss_of, views, spec.step);
}

} // namespace qks
