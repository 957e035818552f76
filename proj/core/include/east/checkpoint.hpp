#pragma once

#include <string>

#include "east/masker.hpp"
#include "east/model.hpp"
#include "east/sampler.hpp"

namespace east::model {

// Self-describing single-file archive: magic "EASTCK01", the resolved run
// configuration echoed as text, the model/mask/sampling settings needed to
// rebuild the network, and every named parameter array. Integers and
// doubles are little-endian.
struct ModelBundle {
    EastModel model;
    masker::MaskConfig mask;
    sampler::SamplingConfig sampling;
    std::string config_echo;

    explicit ModelBundle(const ModelConfig& cfg) : model(cfg) {}
};

void save_checkpoint(const EastModel& model, const masker::MaskConfig& mask,
                     const sampler::SamplingConfig& sampling,
                     const std::string& config_echo, const std::string& path);

ModelBundle load_checkpoint(const std::string& path);

}  // namespace east::model
