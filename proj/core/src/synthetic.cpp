#include "east/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "east/rng.hpp"

namespace east::video {

namespace {

constexpr std::array<Velocity, 8> kDirections = {{
    {1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}, {2, 0}, {0, 2}, {2, 2},
}};

}  // namespace

Velocity direction(int index) { return kDirections.at(std::size_t(index)); }

int SyntheticConfig::boundary_frame() const {
    return int(std::floor(phase_boundary * frames + 1e-9));
}

void SyntheticConfig::validate() const {
    if (n1 < 1 || n2 < 1) throw ConfigError("n1 and n2 must be positive");
    if (n1 > int(kDirections.size()) || n2 > int(kDirections.size()))
        throw ConfigError("direction table has only 8 entries");
    if (frames < 2 || frames % 2 != 0)
        throw ConfigError("frames must be even and at least 2");
    if (phase_boundary <= 0.0 || phase_boundary >= 1.0)
        throw ConfigError("phase_boundary must lie in (0, 1)");
    if (sprite_size < 1 || sprite_size > height || sprite_size > width)
        throw ConfigError("sprite_size out of range");
    if (videos_per_class < 1) throw ConfigError("videos_per_class must be positive");
    if (noise_std < 0.0) throw ConfigError("noise_std must be nonnegative");
    int mx, my;
    start_margin(*this, mx, my);  // throws when some velocity pair escapes
}

void start_margin(const SyntheticConfig& cfg, int& max_x, int& max_y) {
    const int b = cfg.boundary_frame();
    // Displacement at frame t: (t<=b ? t*v1 : b... ) accumulated per phase.
    // Components are nonnegative, so the sweep maximum is at the last frame.
    int worst_x = 0;
    int worst_y = 0;
    for (int d1 = 0; d1 < cfg.n1; ++d1) {
        for (int d2 = 0; d2 < cfg.n2; ++d2) {
            const Velocity v1 = direction(d1);
            const Velocity v2 = direction(d2);
            const int steps1 = b - 1;                // frames 1..b-1 move with v1
            const int steps2 = cfg.frames - b;       // frames b..T_d-1 move with v2
            worst_x = std::max(worst_x, steps1 * v1.dx + steps2 * v2.dx);
            worst_y = std::max(worst_y, steps1 * v1.dy + steps2 * v2.dy);
        }
    }
    max_x = cfg.width - cfg.sprite_size - worst_x;
    max_y = cfg.height - cfg.sprite_size - worst_y;
    if (max_x < 0 || max_y < 0)
        throw ConfigError("sprite escapes the frame for some velocity pair; "
                          "enlarge the frame or shorten the video");
}

VideoTensor render_video(const SyntheticConfig& cfg, int d1, int d2, int start_x,
                         int start_y, std::uint64_t noise_seed) {
    VideoTensor v(cfg.frames, cfg.height, cfg.width, 1);
    const Velocity v1 = direction(d1);
    const Velocity v2 = direction(d2);
    const int b = cfg.boundary_frame();

    int x = start_x;
    int y = start_y;
    Rng noise(noise_seed);
    for (int t = 0; t < cfg.frames; ++t) {
        if (t > 0) {
            const Velocity& vel = (t < b) ? v1 : v2;
            x += vel.dx;
            y += vel.dy;
        }
        for (int sy = 0; sy < cfg.sprite_size; ++sy) {
            for (int sx = 0; sx < cfg.sprite_size; ++sx) {
                v.at(t, y + sy, x + sx, 0) = 255;
            }
        }
        if (cfg.noise_std > 0.0) {
            std::uint8_t* f = v.frame(t);
            for (std::size_t i = 0; i < v.frame_bytes(); ++i) {
                const double n = noise.normal() * cfg.noise_std;
                f[i] = std::uint8_t(std::clamp(std::lround(f[i] + n), 0L, 255L));
            }
        }
    }
    return v;
}

std::vector<LabeledVideo> generate_synthetic_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    int max_x, max_y;
    start_margin(cfg, max_x, max_y);

    std::vector<LabeledVideo> out;
    out.reserve(std::size_t(cfg.num_classes()) * cfg.videos_per_class);
    Rng rng(derive_seed(cfg.seed, 0xea57, 0xda7a));
    for (int d1 = 0; d1 < cfg.n1; ++d1) {
        for (int d2 = 0; d2 < cfg.n2; ++d2) {
            for (int k = 0; k < cfg.videos_per_class; ++k) {
                const int sx = int(rng.uniform(std::uint64_t(max_x) + 1));
                const int sy = int(rng.uniform(std::uint64_t(max_y) + 1));
                const std::uint64_t nseed = rng.next_u64();
                out.push_back({render_video(cfg, d1, d2, sx, sy, nseed),
                               d1 * cfg.n2 + d2});
            }
        }
    }
    return out;
}

double bayes_ceiling(double rho, const SyntheticConfig& cfg) {
    if (rho <= 0.0 || rho > 1.0) throw ContractError("rho must lie in (0, 1]");
    return rho <= cfg.phase_boundary + 1e-9 ? 1.0 / cfg.n2 : 1.0;
}

}  // namespace east::video
