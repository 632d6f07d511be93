#include "vcsr/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vcsr {

TrainConfig TrainConfig::desk_profile() {
    TrainConfig c;
    c.d = 64;
    c.lr = 3e-4;
    c.batch_size = 32;
    c.epochs = 8;
    c.n_negatives = 4;
    return c;
}

void TrainConfig::validate() const {
    if (d < 1 || m < 1 || k < 1 || L_isa < 1 || mmt_layers < 1 || heads < 1)
        throw std::invalid_argument("config: geometry fields must be >= 1");
    if (d % heads != 0) throw std::invalid_argument("config: d must be divisible by heads");
    if (cma_dk < 0) throw std::invalid_argument("config: cma_dk must be >= 0");
    if (n_negatives < 0) throw std::invalid_argument("config: n_negatives must be >= 0");
    if (tau != -1.0 && (tau < 0.0 || tau > 1.0))
        throw std::invalid_argument("config: tau must lie in [0, 1] or be -1 for auto");
    if (neg_pool_ratio != -1.0 && (neg_pool_ratio < 0.0 || neg_pool_ratio > 1.0))
        throw std::invalid_argument("config: neg_pool_ratio must lie in [0, 1] or be -1");
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("config: alpha, beta must be >= 0");
    if (temp_start <= 0.0 || temp_end <= 0.0)
        throw std::invalid_argument("config: gumbel temperatures must be positive");
    if (vc_temperature <= 0.0)
        throw std::invalid_argument("config: vc_temperature must be positive");
    if (readout != "mean" && readout != "cls")
        throw std::invalid_argument("config: readout must be 'mean' or 'cls'");
    if (lr <= 0.0 || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("config: bad optimizer constants");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    if (epochs < 1 || plateau_patience < 1 || batch_size < 1)
        throw std::invalid_argument("config: epochs, plateau_patience, batch_size must be >= 1");
    if (mode != "mc" && mode != "open")
        throw std::invalid_argument("config: mode must be 'mc' or 'open'");
    if (pool_capacity < 0 || max_question_len < 2)
        throw std::invalid_argument("config: bad pool_capacity or max_question_len");
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "d") d = std::stoi(value);
        else if (key == "m") m = std::stoi(value);
        else if (key == "k") k = std::stoi(value);
        else if (key == "L_isa") L_isa = std::stoi(value);
        else if (key == "mmt_layers") mmt_layers = std::stoi(value);
        else if (key == "heads") heads = std::stoi(value);
        else if (key == "cma_dk") cma_dk = std::stoi(value);
        else if (key == "n_negatives") n_negatives = std::stoi(value);
        else if (key == "tau") tau = std::stod(value);
        else if (key == "neg_pool_ratio") neg_pool_ratio = std::stod(value);
        else if (key == "alpha") alpha = std::stod(value);
        else if (key == "beta") beta = std::stod(value);
        else if (key == "temp_start") temp_start = std::stod(value);
        else if (key == "temp_end") temp_end = std::stod(value);
        else if (key == "vc_temperature") vc_temperature = std::stod(value);
        else if (key == "readout") readout = value;
        else if (key == "lr") lr = std::stod(value);
        else if (key == "beta1") beta1 = std::stod(value);
        else if (key == "beta2") beta2 = std::stod(value);
        else if (key == "weight_decay") weight_decay = std::stod(value);
        else if (key == "epochs") epochs = std::stoi(value);
        else if (key == "plateau_patience") plateau_patience = std::stoi(value);
        else if (key == "batch_size") batch_size = std::stoi(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "use_qgr") use_qgr = parse_bool(value, key);
        else if (key == "use_css") use_css = parse_bool(value, key);
        else if (key == "use_vc") use_vc = parse_bool(value, key);
        else if (key == "use_sp") use_sp = parse_bool(value, key);
        else if (key == "mode") mode = value;
        else if (key == "pool_capacity") pool_capacity = std::stoi(value);
        else if (key == "max_question_len") max_question_len = std::stoi(value);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
    }
}

void TrainConfig::save(std::ostream& out) const {
    out << "d=" << d << "\n"
        << "m=" << m << "\n"
        << "k=" << k << "\n"
        << "L_isa=" << L_isa << "\n"
        << "mmt_layers=" << mmt_layers << "\n"
        << "heads=" << heads << "\n"
        << "cma_dk=" << cma_dk << "\n"
        << "n_negatives=" << n_negatives << "\n"
        << "tau=" << tau << "\n"
        << "neg_pool_ratio=" << neg_pool_ratio << "\n"
        << "alpha=" << alpha << "\n"
        << "beta=" << beta << "\n"
        << "temp_start=" << temp_start << "\n"
        << "temp_end=" << temp_end << "\n"
        << "vc_temperature=" << vc_temperature << "\n"
        << "readout=" << readout << "\n"
        << "lr=" << lr << "\n"
        << "beta1=" << beta1 << "\n"
        << "beta2=" << beta2 << "\n"
        << "weight_decay=" << weight_decay << "\n"
        << "epochs=" << epochs << "\n"
        << "plateau_patience=" << plateau_patience << "\n"
        << "batch_size=" << batch_size << "\n"
        << "seed=" << seed << "\n"
        << "use_qgr=" << (use_qgr ? "true" : "false") << "\n"
        << "use_css=" << (use_css ? "true" : "false") << "\n"
        << "use_vc=" << (use_vc ? "true" : "false") << "\n"
        << "use_sp=" << (use_sp ? "true" : "false") << "\n"
        << "mode=" << mode << "\n"
        << "pool_capacity=" << pool_capacity << "\n"
        << "max_question_len=" << max_question_len << "\n";
}

void TrainConfig::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file " + path);
    save(out);
}

void TrainConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        const auto eq = line.find('=', start);
        if (eq == std::string::npos)
            throw std::invalid_argument("config file line " + std::to_string(line_no) +
                                        ": expected key=value");
        auto strip = [](std::string s) {
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.pop_back();
            const auto b = s.find_first_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b);
        };
        set(strip(line.substr(start, eq - start)), strip(line.substr(eq + 1)));
    }
}

}  // namespace vcsr
