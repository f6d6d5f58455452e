#pragma once

#include <optional>
#include <string>

#include "dtcn/channel.hpp"
#include "dtcn/nets.hpp"
#include "dtcn/params.hpp"

namespace dtcn {

enum class PipelineMode { dtcn, jscc_image_only, jscc_text_only };

std::string to_string(PipelineMode mode);
PipelineMode pipeline_mode_from_string(const std::string& s);

struct PipelineConfig {
    std::size_t img_dim = 32;
    std::size_t txt_dim = 16;
    std::size_t num_classes = 10;
    std::size_t d_sem = 16;
    std::size_t d_txt = 8;
    std::size_t d_fused = 16;
    std::size_t n_sym1 = 24;
    std::size_t n_sym2 = 48;
    std::size_t hidden = 32;
    double snr1_db = 10.0;
    double snr2_db = 10.0;
    PipelineMode mode = PipelineMode::dtcn;

    bool has_image_branch() const { return mode != PipelineMode::jscc_text_only; }
    bool has_text_branch() const { return mode != PipelineMode::jscc_image_only; }
};

struct TransmitterModel {
    Mlp semantic_encoder;  // img_dim -> d_sem
    Mlp jsc_encoder;       // d_sem -> n_sym1
};

struct RelayModel {
    std::optional<Mlp> jsc_decoder;   // n_sym1 -> d_sem (absent in text-only)
    std::optional<Mlp> modB_encoder;  // txt_dim -> d_txt (absent in image-only)
    Mlp fusion_net;                   // d_sem + d_txt -> d_fused
    Mlp jsc_encoder2;                 // d_fused -> n_sym2
};

struct ReceiverModel {
    Mlp jsc_decoder2;             // n_sym2 -> d_fused
    Mlp fusion_semantic_decoder;  // d_fused -> K logits
};

// The three pipeline roles plus their dimension config. Branches not used by
// the configured mode are absent.
struct PipelineModels {
    PipelineConfig cfg;
    std::optional<TransmitterModel> tx;
    RelayModel relay;
    ReceiverModel rx;

    static PipelineModels create(const PipelineConfig& cfg, std::uint64_t seed);

    ParameterSet all_params() const;
    void load_all(const ParameterSet& ps);
};

// --- tape-free role forwards (inference path) -------------------------------

SemanticFrame transmitter_forward(const Tensor& x_img, const TransmitterModel& model);
// x_txt == nullptr substitutes a zero vector for the modality-B branch.
SemanticFrame relay_forward(const SemanticFrame& rx_frame, const Tensor* x_txt,
                            const RelayModel& model);
Tensor receiver_forward(const SemanticFrame& rx_frame, const ReceiverModel& model);

// --- full pipeline -----------------------------------------------------------

// Deterministic composition with per-hop AWGN seeded from
// (master_seed, hop_tag, batch_index). Returns [batch, K] logits.
Tensor end_to_end(const Tensor& x_img, const Tensor& x_txt, const PipelineModels& models,
                  std::uint64_t master_seed, std::uint64_t batch_index = 0);

// Device-side stage of joint inference: local encoders plus the first hop.
// For text-only mode the transmitter hop is skipped and modality B passes
// through untouched. Returns the frame as received by the relay.
Tensor device_local_stage(const Tensor& x_img, const Tensor& x_txt, const PipelineModels& models,
                          std::uint64_t master_seed, std::uint64_t batch_index);
// Server-side stage: relay fusion, second hop, receiver classification.
Tensor server_global_stage(const Tensor& rx1, const Tensor& x_txt, const PipelineModels& models,
                           std::uint64_t master_seed, std::uint64_t batch_index);

// Differentiable end-to-end graph for training; channel noise enters as a
// constant. When trainable, all present parameters are registered on the tape.
Var end_to_end_tape(Tape& t, const Tensor& x_img, const Tensor& x_txt,
                    const PipelineModels& models, std::uint64_t master_seed,
                    std::uint64_t batch_index, bool trainable);

}  // namespace dtcn
