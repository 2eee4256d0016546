#include "physflow/nn/serialize.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace physflow::nn {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'F', 'N', 'N'};

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("model file truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
    return value;
}

const char* name_of(Activation a) { return a == Activation::ReLU ? "relu" : "linear"; }
const char* name_of(Padding p) { return p == Padding::Same ? "same" : "valid"; }

json spec_to_json(const ModelSpec& s) {
    json dense = json::array();
    for (const auto& d : s.dense) dense.push_back({{"units", d.units}, {"activation", name_of(d.activation)}});
    return {{"stations", s.stations},
            {"lag", s.lag},
            {"conv",
             {{"filters", s.conv.filters},
              {"kernel", {s.conv.kernel_stations, s.conv.kernel_time}},
              {"padding", name_of(s.conv.padding)}}},
            {"lstm", s.lstm_units},
            {"dense", dense}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.stations = j.at("stations").get<std::size_t>();
    s.lag = j.at("lag").get<std::size_t>();
    const auto& c = j.at("conv");
    s.conv.filters = c.at("filters").get<std::size_t>();
    s.conv.kernel_stations = c.at("kernel").at(0).get<std::size_t>();
    s.conv.kernel_time = c.at("kernel").at(1).get<std::size_t>();
    s.conv.padding = c.at("padding").get<std::string>() == "valid" ? Padding::Valid : Padding::Same;
    s.lstm_units = j.at("lstm").get<std::vector<std::size_t>>();
    s.dense.clear();
    for (const auto& d : j.at("dense")) {
        s.dense.push_back({d.at("units").get<std::size_t>(),
                           d.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::Linear});
    }
    return s;
}

} // namespace

void save_model(const TrainedModel& model, std::ostream& out) {
    const auto& sc = model.scaler;
    json header = {{"spec", spec_to_json(model.model.spec())},
                   {"scaler",
                    {{"input_mean", sc.input_mean},
                     {"input_std", sc.input_std},
                     {"target_mean", sc.target_mean},
                     {"target_std", sc.target_std}}},
                   {"metadata", model.metadata},
                   {"param_count", model.model.param_count()}};
    const std::string text = header.dump();
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kModelFormatVersion);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_le<std::uint64_t>(out, model.model.param_count());
    for (double p : model.model.params()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p));
    if (!out) throw DataError("failed writing model");
}

TrainedModel load_model(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a PFNN model file");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kModelFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version));
    }
    const auto len = get_le<std::uint64_t>(in);
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError("model header truncated");
    const json header = json::parse(text);

    TrainedModel tm{Model(spec_from_json(header.at("spec"))), {}, {}};
    const auto& sc = header.at("scaler");
    tm.scaler.input_mean = sc.at("input_mean").get<std::vector<double>>();
    tm.scaler.input_std = sc.at("input_std").get<std::vector<double>>();
    tm.scaler.target_mean = sc.at("target_mean").get<std::vector<double>>();
    tm.scaler.target_std = sc.at("target_std").get<std::vector<double>>();
    tm.metadata = header.at("metadata").get<std::map<std::string, std::string>>();

    const auto count = get_le<std::uint64_t>(in);
    if (count != tm.model.param_count() || count != header.at("param_count").get<std::uint64_t>()) {
        throw DataError("parameter count does not match the stored spec");
    }
    for (auto& p : tm.model.params()) p = std::bit_cast<double>(get_le<std::uint64_t>(in));
    return tm;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    save_model(model, out);
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return load_model(in);
}

} // namespace physflow::nn
