#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "arsp/core.hpp"

namespace arsp {

/// How the SARP azimuth profile picks its fast-time samples.
enum class IntegrationMode {
    first,    ///< the first IF samples of each beam
    strided,  ///< every (P/IF)-th sample
};

/// Sequence carried by pulse m.
enum class PulseAlternation {
    alternate,  ///< a, b, a, b, ...
    repeat,     ///< a on every pulse
};

/// Waveform, array and search-grid parameters shared by every stage.
struct RadarConfig {
    std::size_t P = 1024;  ///< fast-time samples per pulse
    std::size_t L = 32;    ///< receive antennas
    std::size_t M = 32;    ///< pulses per CPI
    double sample_period = 1.0 / 1.76e9;
    double pri = 0.5e-6;
    double c = kSpeedOfLight;
    double wavelength = kSpeedOfLight / 60e9;
    double element_spacing = 0.5 * (kSpeedOfLight / 60e9);
    double fov_min_deg = -90.0;
    double fov_max_deg = 90.0;
    double angle_step_deg = 1.0;
    std::size_t integration_factor = 512;
    IntegrationMode integration_mode = IntegrationMode::first;
    PulseAlternation alternation = PulseAlternation::alternate;

    std::size_t num_angles() const {
        return static_cast<std::size_t>(std::floor((fov_max_deg - fov_min_deg) / angle_step_deg + 1e-9)) + 1;
    }

    double angle_deg(std::size_t i) const { return fov_min_deg + static_cast<double>(i) * angle_step_deg; }

    std::vector<double> angle_grid_deg() const {
        std::vector<double> g(num_angles());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = angle_deg(i);
        return g;
    }

    /// Range spanned by one fast-time bin, m.
    double range_bin_m() const { return sample_period * c / 2.0; }

    /// Farthest range whose echo still starts inside the first half of the pulse.
    double r_max() const { return static_cast<double>(P / 2) * range_bin_m(); }

    double range_of_bin(std::size_t bin) const { return static_cast<double>(bin) * range_bin_m(); }

    /// Nearest fast-time bin for a round-trip delay of 2r/c.
    long delay_bin(double range_m) const {
        return std::lround(2.0 * range_m / (c * sample_period));
    }

    void validate() const {
        if (P < 1 || L < 1 || M < 1) throw std::invalid_argument("RadarConfig: P, L, M must be >= 1");
        if (!is_power_of_two(P)) throw std::invalid_argument("RadarConfig: P must be a power of two");
        if (!(angle_step_deg > 0.0)) throw std::invalid_argument("RadarConfig: angle step must be positive");
        if (!(fov_max_deg >= fov_min_deg)) throw std::invalid_argument("RadarConfig: empty field of view");
        if (!(element_spacing > 0.0) || !(wavelength > 0.0))
            throw std::invalid_argument("RadarConfig: spacing and wavelength must be positive");
        if (!(sample_period > 0.0) || !(pri > 0.0) || !(c > 0.0))
            throw std::invalid_argument("RadarConfig: timing constants must be positive");
        if (integration_factor < 1 || integration_factor > P || P % integration_factor != 0)
            throw std::invalid_argument("RadarConfig: integration factor must divide P");
    }
};

}  // namespace arsp
