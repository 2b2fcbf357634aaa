#pragma once

#include <array>
#include <string>
#include <string_view>

namespace laclip {

// Provenance of a rewrite demonstration pair: which process produced the
// target caption from the source caption.
enum class Strategy { chatgpt, bard, mscoco, human };

constexpr std::array<Strategy, 4> kAllStrategies = {Strategy::chatgpt, Strategy::bard,
                                                    Strategy::mscoco, Strategy::human};

struct MetaPair {
    std::string_view source;  // caption as found in an image-text dataset
    std::string_view target;  // its rewritten counterpart
    Strategy strategy;
};

// 16 fixed demonstration pairs per strategy. The mscoco pairs are two
// distinct human annotations of the same image.
const std::array<MetaPair, 16>& meta_pairs(Strategy strategy);

std::string_view strategy_name(Strategy strategy);

// Throws UnknownStrategy.
Strategy parse_strategy(std::string_view name);

}  // namespace laclip
