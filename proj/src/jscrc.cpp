#include "dtcn/jscrc.hpp"

#include <stdexcept>

namespace dtcn {

std::string to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::dtcn: return "dtcn";
        case PipelineMode::jscc_image_only: return "jscc_image_only";
        case PipelineMode::jscc_text_only: return "jscc_text_only";
    }
    return "?";
}

PipelineMode pipeline_mode_from_string(const std::string& s) {
    if (s == "dtcn") return PipelineMode::dtcn;
    if (s == "jscc_image_only") return PipelineMode::jscc_image_only;
    if (s == "jscc_text_only") return PipelineMode::jscc_text_only;
    throw std::invalid_argument("unknown pipeline mode: " + s);
}

PipelineModels PipelineModels::create(const PipelineConfig& cfg, std::uint64_t seed) {
    PipelineModels m;
    m.cfg = cfg;
    Rng rng(combine_seed(seed, 0x90DE15));
    if (cfg.has_image_branch()) {
        m.tx.emplace();
        m.tx->semantic_encoder =
            Mlp("tx.sem", {cfg.img_dim, cfg.hidden, cfg.d_sem}, Activation::relu);
        m.tx->jsc_encoder = Mlp("tx.jsc", {cfg.d_sem, cfg.hidden, cfg.n_sym1}, Activation::relu);
        m.relay.jsc_decoder.emplace(
            Mlp("relay.jscdec", {cfg.n_sym1, cfg.hidden, cfg.d_sem}, Activation::relu));
        m.tx->semantic_encoder.init(rng);
        m.tx->jsc_encoder.init(rng);
        m.relay.jsc_decoder->init(rng);
    }
    if (cfg.has_text_branch()) {
        m.relay.modB_encoder.emplace(
            Mlp("relay.txt", {cfg.txt_dim, cfg.hidden, cfg.d_txt}, Activation::relu));
        m.relay.modB_encoder->init(rng);
    }
    m.relay.fusion_net =
        Mlp("relay.fusion", {cfg.d_sem + cfg.d_txt, cfg.hidden, cfg.d_fused}, Activation::relu);
    m.relay.jsc_encoder2 = Mlp("relay.jsc2", {cfg.d_fused, cfg.hidden, cfg.n_sym2}, Activation::relu);
    m.rx.jsc_decoder2 = Mlp("rx.jscdec2", {cfg.n_sym2, cfg.hidden, cfg.d_fused}, Activation::relu);
    m.rx.fusion_semantic_decoder =
        Mlp("rx.fsd", {cfg.d_fused, cfg.hidden, cfg.num_classes}, Activation::relu);
    m.relay.fusion_net.init(rng);
    m.relay.jsc_encoder2.init(rng);
    m.rx.jsc_decoder2.init(rng);
    m.rx.fusion_semantic_decoder.init(rng);
    return m;
}

ParameterSet PipelineModels::all_params() const {
    ParameterSet ps;
    if (tx) {
        tx->semantic_encoder.export_to(ps);
        tx->jsc_encoder.export_to(ps);
    }
    if (relay.jsc_decoder) relay.jsc_decoder->export_to(ps);
    if (relay.modB_encoder) relay.modB_encoder->export_to(ps);
    relay.fusion_net.export_to(ps);
    relay.jsc_encoder2.export_to(ps);
    rx.jsc_decoder2.export_to(ps);
    rx.fusion_semantic_decoder.export_to(ps);
    return ps;
}

void PipelineModels::load_all(const ParameterSet& ps) {
    if (tx) {
        tx->semantic_encoder.load_from(ps);
        tx->jsc_encoder.load_from(ps);
    }
    if (relay.jsc_decoder) relay.jsc_decoder->load_from(ps);
    if (relay.modB_encoder) relay.modB_encoder->load_from(ps);
    relay.fusion_net.load_from(ps);
    relay.jsc_encoder2.load_from(ps);
    rx.jsc_decoder2.load_from(ps);
    rx.fusion_semantic_decoder.load_from(ps);
}

SemanticFrame transmitter_forward(const Tensor& x_img, const TransmitterModel& model) {
    if (x_img.ndim() != 2 || x_img.cols() != model.semantic_encoder.in_dim())
        throw std::invalid_argument("transmitter_forward: bad input shape " + shape_str(x_img));
    Tensor sem = model.semantic_encoder.forward_value(x_img);
    Tensor sym = model.jsc_encoder.forward_value(sem);
    return normalize_power(SemanticFrame{std::move(sym), HopTag::device_to_relay});
}

SemanticFrame relay_forward(const SemanticFrame& rx_frame, const Tensor* x_txt,
                            const RelayModel& model) {
    if (!model.jsc_decoder)
        throw std::invalid_argument("relay_forward: relay has no device-hop decoder");
    const std::size_t batch = rx_frame.symbols.rows();
    Tensor decoded = model.jsc_decoder->forward_value(rx_frame.symbols);
    Tensor txt_feat;
    if (x_txt != nullptr) {
        if (!model.modB_encoder)
            throw std::invalid_argument("relay_forward: relay has no modality-B encoder");
        if (x_txt->rows() != batch)
            throw std::invalid_argument("relay_forward: batch mismatch between frame (" +
                                        std::to_string(batch) + ") and text (" +
                                        std::to_string(x_txt->rows()) + ")");
        txt_feat = model.modB_encoder->forward_value(*x_txt);
    } else {
        txt_feat = Tensor({batch, model.fusion_net.in_dim() - decoded.cols()});
    }
    Tape t;
    Var fused_in = concat_cols(t.leaf(decoded), t.leaf(txt_feat));
    Tensor fused = model.fusion_net.forward_value(fused_in.value());
    Tensor sym2 = model.jsc_encoder2.forward_value(fused);
    return normalize_power(SemanticFrame{std::move(sym2), HopTag::relay_to_receiver});
}

Tensor receiver_forward(const SemanticFrame& rx_frame, const ReceiverModel& model) {
    if (rx_frame.symbols.ndim() != 2 || rx_frame.symbols.cols() != model.jsc_decoder2.in_dim())
        throw std::invalid_argument("receiver_forward: bad frame shape " +
                                    shape_str(rx_frame.symbols));
    Tensor fused = model.jsc_decoder2.forward_value(rx_frame.symbols);
    return model.fusion_semantic_decoder.forward_value(fused);
}

Tensor device_local_stage(const Tensor& x_img, const Tensor& /*x_txt*/,
                          const PipelineModels& models, std::uint64_t master_seed,
                          std::uint64_t batch_index) {
    if (!models.cfg.has_image_branch()) return Tensor{};  // transmitter hop skipped
    SemanticFrame frame = transmitter_forward(x_img, *models.tx);
    Rng rng(derive_hop_seed(master_seed, HopTag::device_to_relay, batch_index));
    return awgn_transmit(frame, {models.cfg.snr1_db, 0}, rng).symbols;
}

Tensor server_global_stage(const Tensor& rx1, const Tensor& x_txt, const PipelineModels& models,
                           std::uint64_t master_seed, std::uint64_t batch_index) {
    const PipelineConfig& cfg = models.cfg;
    Tensor decoded, txt_feat;
    std::size_t batch = 0;
    if (cfg.has_image_branch()) {
        batch = rx1.rows();
        decoded = models.relay.jsc_decoder->forward_value(rx1);
    } else {
        batch = x_txt.rows();
        decoded = Tensor({batch, cfg.d_sem});
    }
    if (cfg.has_text_branch()) {
        if (x_txt.rows() != batch)
            throw std::invalid_argument("server_global_stage: batch mismatch");
        txt_feat = models.relay.modB_encoder->forward_value(x_txt);
    } else {
        txt_feat = Tensor({batch, cfg.d_txt});
    }
    Tape t;
    Tensor fused_in = concat_cols(t.leaf(decoded), t.leaf(txt_feat)).value();
    Tensor fused = models.relay.fusion_net.forward_value(fused_in);
    Tensor sym2 = models.relay.jsc_encoder2.forward_value(fused);
    SemanticFrame frame2 =
        normalize_power(SemanticFrame{std::move(sym2), HopTag::relay_to_receiver});
    Rng rng(derive_hop_seed(master_seed, HopTag::relay_to_receiver, batch_index));
    SemanticFrame noisy = awgn_transmit(frame2, {cfg.snr2_db, 0}, rng);
    return receiver_forward(noisy, models.rx);
}

Tensor end_to_end(const Tensor& x_img, const Tensor& x_txt, const PipelineModels& models,
                  std::uint64_t master_seed, std::uint64_t batch_index) {
    Tensor rx1 = device_local_stage(x_img, x_txt, models, master_seed, batch_index);
    return server_global_stage(rx1, x_txt, models, master_seed, batch_index);
}

Var end_to_end_tape(Tape& t, const Tensor& x_img, const Tensor& x_txt,
                    const PipelineModels& models, std::uint64_t master_seed,
                    std::uint64_t batch_index, bool trainable) {
    const PipelineConfig& cfg = models.cfg;
    const std::size_t batch = cfg.has_image_branch() ? x_img.rows() : x_txt.rows();
    Var decoded, txt_feat;
    if (cfg.has_image_branch()) {
        Var sem = models.tx->semantic_encoder.forward(t, t.leaf(x_img), trainable);
        Var sym1 = normalize_rows_power(models.tx->jsc_encoder.forward(t, sem, trainable));
        Rng rng1(derive_hop_seed(master_seed, HopTag::device_to_relay, batch_index));
        Var rx1 = add_constant(sym1, draw_awgn_noise(sym1.value().shape, cfg.snr1_db, rng1));
        decoded = models.relay.jsc_decoder->forward(t, rx1, trainable);
    } else {
        decoded = t.leaf(Tensor({batch, cfg.d_sem}));
    }
    if (cfg.has_text_branch()) {
        txt_feat = models.relay.modB_encoder->forward(t, t.leaf(x_txt), trainable);
    } else {
        txt_feat = t.leaf(Tensor({batch, cfg.d_txt}));
    }
    Var fused = models.relay.fusion_net.forward(t, concat_cols(decoded, txt_feat), trainable);
    Var sym2 = normalize_rows_power(models.relay.jsc_encoder2.forward(t, fused, trainable));
    Rng rng2(derive_hop_seed(master_seed, HopTag::relay_to_receiver, batch_index));
    Var rx2 = add_constant(sym2, draw_awgn_noise(sym2.value().shape, cfg.snr2_db, rng2));
    Var fused_hat = models.rx.jsc_decoder2.forward(t, rx2, trainable);
    return models.rx.fusion_semantic_decoder.forward(t, fused_hat, trainable);
}

}  // namespace dtcn
