#include "trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace dode {

const Batch* Trajectory::state_at(double time, double tol) const {
    if (!recorded) return nullptr;
    for (size_t i = 0; i < times.size(); ++i)
        if (std::abs(times[i] - time) <= tol) return &states[i];
    for (const auto& step : steps)
        for (const auto& stage : step.stages)
            if (std::abs(stage.time - time) <= tol) return &stage.state;
    return nullptr;
}

void Trajectory::write_csv(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
    std::fprintf(f, "sample,step,time,coord,value\n");
    for (size_t k = 0; k < states.size(); ++k) {
        // without recording only the final state exists; label it with the
        // last grid index
        size_t step = recorded ? k : times.size() - 1;
        double time = recorded ? times[k] : times.back();
        const Batch& s = states[k];
        for (size_t b = 0; b < s.batch; ++b)
            for (size_t j = 0; j < s.dim; ++j)
                std::fprintf(f, "%zu,%zu,%.17g,%zu,%.17g\n", b, step, time, j, s.at(b, j));
    }
    std::fclose(f);
}

namespace {

constexpr char kMagic[8] = {'D', 'O', 'D', 'E', 'T', 'R', 'J', '1'};

void put_u64(FILE* f, uint64_t v) {
    std::fwrite(&v, sizeof(v), 1, f);
}

uint64_t get_u64(FILE* f) {
    uint64_t v = 0;
    if (std::fread(&v, sizeof(v), 1, f) != 1) fail(ErrorCode::io, "truncated trajectory file");
    return v;
}

void put_doubles(FILE* f, const double* p, size_t n) {
    if (n && std::fwrite(p, sizeof(double), n, f) != n)
        fail(ErrorCode::io, "write failure on trajectory file");
}

void get_doubles(FILE* f, double* p, size_t n) {
    if (n && std::fread(p, sizeof(double), n, f) != n)
        fail(ErrorCode::io, "truncated trajectory file");
}

void put_batch(FILE* f, const Batch& b) {
    put_u64(f, b.batch);
    put_u64(f, b.dim);
    put_doubles(f, b.data.data(), b.data.size());
}

Batch get_batch(FILE* f) {
    uint64_t n = get_u64(f), d = get_u64(f);
    Batch b(n, d);
    get_doubles(f, b.data.data(), b.data.size());
    return b;
}

struct FileCloser {
    FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

}  // namespace

void Trajectory::write_binary(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) fail(ErrorCode::io, "cannot open " + path + " for writing");
    FileCloser closer{f};
    std::fwrite(kMagic, 1, sizeof(kMagic), f);
    put_u64(f, recorded ? 1 : 0);
    put_u64(f, uint64_t(nfe));
    put_u64(f, times.size());
    put_doubles(f, times.data(), times.size());
    put_u64(f, states.size());
    for (const auto& s : states) put_batch(f, s);
    put_u64(f, steps.size());
    for (const auto& step : steps) {
        put_doubles(f, &step.t_from, 1);
        put_doubles(f, &step.t_to, 1);
        put_batch(f, step.output);
        put_u64(f, step.stages.size());
        for (const auto& stage : step.stages) {
            put_doubles(f, &stage.time, 1);
            put_batch(f, stage.state);
            put_batch(f, stage.output);
        }
    }
}

Trajectory Trajectory::read_binary(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) fail(ErrorCode::io, "cannot open " + path);
    FileCloser closer{f};
    char magic[8];
    if (std::fread(magic, 1, sizeof(magic), f) != sizeof(magic) ||
        std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        fail(ErrorCode::io, path + " is not a trajectory dump");
    Trajectory out;
    out.recorded = get_u64(f) != 0;
    out.nfe = long(get_u64(f));
    out.times.resize(get_u64(f));
    get_doubles(f, out.times.data(), out.times.size());
    out.states.resize(get_u64(f));
    for (auto& s : out.states) s = get_batch(f);
    out.steps.resize(get_u64(f));
    for (auto& step : out.steps) {
        get_doubles(f, &step.t_from, 1);
        get_doubles(f, &step.t_to, 1);
        step.output = get_batch(f);
        step.stages.resize(get_u64(f));
        for (auto& stage : step.stages) {
            get_doubles(f, &stage.time, 1);
            stage.state = get_batch(f);
            stage.output = get_batch(f);
        }
    }
    return out;
}

}  // namespace dode
