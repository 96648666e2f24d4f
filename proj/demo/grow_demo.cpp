// Grow one cluster per built-in law and print how the inner radius tracks the
// walker count.

#include <cstdio>

#include "idla/cluster.hpp"
#include "idla/harness.hpp"

int main() {
    const long long m = 2000;
    const std::vector<long long> checkpoints = {250, 500, 1000, 2000};
    for (const auto& name : idla::law_preset_names()) {
        const auto law = idla::law_from_spec(name);
        idla::Cluster cluster;
        const auto res = idla::run_cluster(cluster, law, m, 0xDEC0DE, checkpoints);
        std::printf("%-8s  ", name.c_str());
        for (const auto& cp : res.checkpoints)
            std::printf("r_%lld/%lld = %.3f   ", cp.m, cp.m,
                        static_cast<double>(cp.r) / static_cast<double>(cp.m));
        std::printf("(span [%lld, %lld], lost beyond 4x radius: %lld)\n", cluster.min_site(),
                    cluster.max_site(), cluster.lost_particles(cluster.inner_radius(), 4.0));
    }
    return 0;
}
