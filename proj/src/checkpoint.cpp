#include "creagen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace creagen {

namespace {

constexpr char kMagic[8] = {'C', 'R', 'E', 'A', 'G', 'E', 'N', '\0'};

template <class U>
void put(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
   public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

    template <class U>
    U get(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == b_.size(); }

   private:
    void need(std::size_t n, const char* what) {
        if (b_.size() - pos_ < n) throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
    }

    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t.tensor;
    throw std::runtime_error("checkpoint has no tensor '" + name + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::ordered_json& header,
                                            const std::vector<NamedTensor>& tensors) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string text = header.dump();
    put<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(out, d);
        for (double v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.bytes(8, "magic") != std::string(kMagic, 8)) throw std::runtime_error("not a checkpoint file (bad magic)");
    auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    auto hlen = r.get<std::uint64_t>("header length");
    ck.header = nlohmann::ordered_json::parse(r.bytes(hlen, "header"));
    auto count = r.get<std::uint32_t>("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        auto nlen = r.get<std::uint32_t>("name length");
        std::string name = r.bytes(nlen, "name");
        auto rank = r.get<std::uint32_t>("rank");
        Shape shape(rank);
        for (auto& d : shape) d = r.get<std::uint64_t>("dims");
        std::vector<double> data(shape_numel(shape));
        for (auto& v : data) v = std::bit_cast<float>(r.get<std::uint32_t>("values"));
        ck.tensors.push_back({name, Tensor(shape, std::move(data))});
    }
    if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::ordered_json& header,
                     const std::vector<NamedTensor>& tensors) {
    auto bytes = encode_checkpoint(header, tensors);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_checkpoint(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void restore_tensors(const Checkpoint& ckpt, const std::vector<NamedTensor>& targets) {
    for (const auto& [name, target] : targets) {
        const Tensor& src = ckpt.find(name);
        if (src.shape() != target.shape()) {
            throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + shape_str(src.shape()) +
                                     ", network expects " + shape_str(target.shape()));
        }
        Tensor dst = target;
        auto d = dst.mutable_data();
        auto s = src.data();
        std::copy(s.begin(), s.end(), d.begin());
    }
}

}  // namespace creagen
