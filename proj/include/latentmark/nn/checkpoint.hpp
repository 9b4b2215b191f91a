#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "latentmark/core/check.hpp"
#include "latentmark/nn/graph.hpp"
#include "latentmark/nn/tensor.hpp"

namespace latentmark::nn {

// Single-file checkpoint container: magic, version, JSON manifest, named
// tensors. The weight checksum (FNV-1a over payload bytes) is what other
// checkpoints embed to pin cross-module compatibility.
class TensorArchive {
public:
    static constexpr uint32_t kVersion = 1;

    nlohmann::json manifest;

    template <class T>
    void add(const std::string& name, const Tensor<T>& t) {
        Entry e;
        e.name = name;
        e.f64 = std::is_same_v<T, double>;
        for (int64_t d : t.shape()) e.shape.push_back(static_cast<uint64_t>(d));
        const size_t elem = e.f64 ? 8 : 4;
        e.bytes.resize(static_cast<size_t>(t.numel()) * elem);
        if (e.f64) {
            std::memcpy(e.bytes.data(), t.data(), e.bytes.size());
        } else {
            std::vector<float> tmp(static_cast<size_t>(t.numel()));
            for (int64_t i = 0; i < t.numel(); ++i) tmp[static_cast<size_t>(i)] = static_cast<float>(t[i]);
            std::memcpy(e.bytes.data(), tmp.data(), e.bytes.size());
        }
        entries_.push_back(std::move(e));
    }

    template <class T>
    Tensor<T> get(const std::string& name) const {
        for (const auto& e : entries_) {
            if (e.name != name) continue;
            Shape s;
            for (uint64_t d : e.shape) s.push_back(static_cast<int64_t>(d));
            Tensor<T> t(s);
            if (e.f64) {
                std::vector<double> tmp(static_cast<size_t>(t.numel()));
                std::memcpy(tmp.data(), e.bytes.data(), e.bytes.size());
                for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(tmp[static_cast<size_t>(i)]);
            } else {
                std::vector<float> tmp(static_cast<size_t>(t.numel()));
                std::memcpy(tmp.data(), e.bytes.data(), e.bytes.size());
                for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(tmp[static_cast<size_t>(i)]);
            }
            return t;
        }
        throw IoError("checkpoint: missing tensor '" + name + "'");
    }

    bool has(const std::string& name) const {
        for (const auto& e : entries_)
            if (e.name == name) return true;
        return false;
    }

    // FNV-1a 64 over tensor payload bytes, in file order.
    uint64_t checksum() const {
        uint64_t h = 1469598103934665603ULL;
        for (const auto& e : entries_)
            for (unsigned char b : e.bytes) {
                h ^= b;
                h *= 1099511628211ULL;
            }
        return h;
    }

    std::string checksum_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum()));
        return buf;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint for writing: " + path);
        f.write("LMCK", 4);
        write_u32(f, kVersion);
        const std::string mj = manifest.dump();
        write_u64(f, mj.size());
        f.write(mj.data(), static_cast<std::streamsize>(mj.size()));
        write_u64(f, entries_.size());
        for (const auto& e : entries_) {
            write_u32(f, static_cast<uint32_t>(e.name.size()));
            f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
            f.put(e.f64 ? 1 : 0);
            write_u32(f, static_cast<uint32_t>(e.shape.size()));
            for (uint64_t d : e.shape) write_u64(f, d);
            f.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
        }
        if (!f) throw IoError("short write to checkpoint: " + path);
    }

    static TensorArchive load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open checkpoint: " + path);
        char magic[4];
        f.read(magic, 4);
        if (!f || std::memcmp(magic, "LMCK", 4) != 0) throw IoError("not a checkpoint file: " + path);
        const uint32_t ver = read_u32(f);
        if (ver != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(ver));
        TensorArchive a;
        const uint64_t mlen = read_u64(f);
        std::string mj(mlen, '\0');
        f.read(mj.data(), static_cast<std::streamsize>(mlen));
        a.manifest = nlohmann::json::parse(mj);
        const uint64_t count = read_u64(f);
        for (uint64_t i = 0; i < count; ++i) {
            Entry e;
            const uint32_t nl = read_u32(f);
            e.name.resize(nl);
            f.read(e.name.data(), nl);
            e.f64 = f.get() != 0;
            const uint32_t nd = read_u32(f);
            uint64_t numel = 1;
            for (uint32_t d = 0; d < nd; ++d) {
                e.shape.push_back(read_u64(f));
                numel *= e.shape.back();
            }
            e.bytes.resize(numel * (e.f64 ? 8 : 4));
            f.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
            if (!f) throw IoError("truncated checkpoint: " + path);
            a.entries_.push_back(std::move(e));
        }
        return a;
    }

private:
    struct Entry {
        std::string name;
        bool f64 = false;
        std::vector<uint64_t> shape;
        std::vector<unsigned char> bytes;
    };

    static void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
    static void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }
    static uint32_t read_u32(std::ifstream& f) {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static uint64_t read_u64(std::ifstream& f) {
        uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    }

    std::vector<Entry> entries_;
};

template <class T>
void archive_params(TensorArchive& a, const std::vector<Param<T>*>& params) {
    for (const auto* p : params) a.add(p->name, p->value);
}

template <class T>
void restore_params(const TensorArchive& a, const std::vector<Param<T>*>& params) {
    for (auto* p : params) {
        Tensor<T> t = a.template get<T>(p->name);
        check_shape(t.same_shape(p->value), "checkpoint tensor '" + p->name + "' has shape " +
                                                shape_str(t.shape()) + ", expected " + shape_str(p->value.shape()));
        p->value = std::move(t);
        p->reset_moments();
    }
}

}  // namespace latentmark::nn
