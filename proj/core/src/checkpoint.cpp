#include "east/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace east::model {

namespace {

constexpr char kMagic[8] = {'E', 'A', 'S', 'T', 'C', 'K', '0', '1'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("checkpoint: short write");
}

void put_f64(std::FILE* f, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (bits >> (8 * i)) & 0xff;
    if (std::fwrite(b, 1, 8, f) != 8) throw IoError("checkpoint: short write");
}

void put_str(std::FILE* f, const std::string& s) {
    put_u32(f, std::uint32_t(s.size()));
    if (std::fwrite(s.data(), 1, s.size(), f) != s.size())
        throw IoError("checkpoint: short write");
}

std::uint32_t get_u32(std::FILE* f, const std::string& path) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw IoError(path + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

double get_f64(std::FILE* f, const std::string& path) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) throw IoError(path + ": truncated checkpoint");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string get_str(std::FILE* f, const std::string& path) {
    const std::uint32_t n = get_u32(f, path);
    std::string s(n, '\0');
    if (n > 0 && std::fread(s.data(), 1, n, f) != n)
        throw IoError(path + ": truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const EastModel& model, const masker::MaskConfig& mask,
                     const sampler::SamplingConfig& sampling,
                     const std::string& config_echo, const std::string& path) {
    File f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError(path + ": cannot open for writing");
    if (std::fwrite(kMagic, 1, 8, f.get()) != 8) throw IoError("checkpoint: short write");
    put_str(f.get(), config_echo);

    const ModelConfig& mc = model.config();
    put_u32(f.get(), std::uint32_t(mc.feat));
    put_u32(f.get(), std::uint32_t(mc.enc_layers));
    put_u32(f.get(), std::uint32_t(mc.enc_heads));
    put_u32(f.get(), std::uint32_t(mc.dec_variant));
    put_u32(f.get(), std::uint32_t(mc.dec_layers));
    put_u32(f.get(), std::uint32_t(mc.dec_heads));
    put_u32(f.get(), std::uint32_t(mc.patch));
    put_u32(f.get(), std::uint32_t(mc.tubelet));
    put_u32(f.get(), std::uint32_t(mc.frames_per_half));
    put_u32(f.get(), std::uint32_t(mc.height));
    put_u32(f.get(), std::uint32_t(mc.width));
    put_u32(f.get(), std::uint32_t(mc.channels));
    put_u32(f.get(), std::uint32_t(mc.num_classes));
    put_u32(f.get(), std::uint32_t(mc.classifier));
    put_u32(f.get(), std::uint32_t(mc.mlp_ratio));

    put_u32(f.get(), std::uint32_t(mask.patch));
    put_u32(f.get(), std::uint32_t(mask.tubelet));
    put_f64(f.get(), mask.masked_fraction);
    put_u32(f.get(), std::uint32_t(mask.kind));

    put_u32(f.get(), std::uint32_t(sampling.frames_per_half));
    put_u32(f.get(), std::uint32_t(sampling.mode));
    put_f64(f.get(), sampling.fixed_rho);
    put_u32(f.get(), std::uint32_t(sampling.rho_grid.size()));
    for (double r : sampling.rho_grid) put_f64(f.get(), r);

    const auto& infos = model.params().infos();
    put_u32(f.get(), std::uint32_t(infos.size()));
    for (std::size_t i = 0; i < infos.size(); ++i) {
        const ParamInfo& info = infos[i];
        put_str(f.get(), info.name);
        put_u32(f.get(), std::uint32_t(info.rows));
        put_u32(f.get(), std::uint32_t(info.cols));
        const double* p = model.params().p(int(i));
        for (std::size_t q = 0; q < info.size(); ++q) put_f64(f.get(), p[q]);
    }
    if (std::fflush(f.get()) != 0) throw IoError(path + ": flush failed");
}

ModelBundle load_checkpoint(const std::string& path) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError(path + ": cannot open for reading");
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8)
        throw IoError(path + ": truncated checkpoint");
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw IoError(path + ": not an EASTCK01 checkpoint");
    const std::string echo = get_str(f.get(), path);

    ModelConfig mc;
    mc.feat = int(get_u32(f.get(), path));
    mc.enc_layers = int(get_u32(f.get(), path));
    mc.enc_heads = int(get_u32(f.get(), path));
    mc.dec_variant = DecoderVariant(get_u32(f.get(), path));
    mc.dec_layers = int(get_u32(f.get(), path));
    mc.dec_heads = int(get_u32(f.get(), path));
    mc.patch = int(get_u32(f.get(), path));
    mc.tubelet = int(get_u32(f.get(), path));
    mc.frames_per_half = int(get_u32(f.get(), path));
    mc.height = int(get_u32(f.get(), path));
    mc.width = int(get_u32(f.get(), path));
    mc.channels = int(get_u32(f.get(), path));
    mc.num_classes = int(get_u32(f.get(), path));
    mc.classifier = ClassifierMode(get_u32(f.get(), path));
    mc.mlp_ratio = int(get_u32(f.get(), path));

    ModelBundle bundle(mc);
    bundle.config_echo = echo;
    bundle.mask.patch = int(get_u32(f.get(), path));
    bundle.mask.tubelet = int(get_u32(f.get(), path));
    bundle.mask.masked_fraction = get_f64(f.get(), path);
    bundle.mask.kind = masker::MaskKind(get_u32(f.get(), path));

    bundle.sampling.frames_per_half = int(get_u32(f.get(), path));
    bundle.sampling.mode = sampler::SamplingMode(get_u32(f.get(), path));
    bundle.sampling.fixed_rho = get_f64(f.get(), path);
    bundle.sampling.rho_grid.resize(get_u32(f.get(), path));
    for (double& r : bundle.sampling.rho_grid) r = get_f64(f.get(), path);

    const std::uint32_t count = get_u32(f.get(), path);
    if (count != bundle.model.params().infos().size())
        throw IoError(path + ": parameter array count mismatch");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = get_str(f.get(), path);
        const int rows = int(get_u32(f.get(), path));
        const int cols = int(get_u32(f.get(), path));
        const int idx = bundle.model.params().find(name);
        if (idx < 0) throw IoError(path + ": unknown parameter array " + name);
        const ParamInfo& info = bundle.model.params().info(idx);
        if (info.rows != rows || info.cols != cols)
            throw IoError(path + ": shape mismatch for " + name);
        double* p = bundle.model.params().p(idx);
        for (std::size_t q = 0; q < info.size(); ++q) p[q] = get_f64(f.get(), path);
    }
    return bundle;
}

}  // namespace east::model
