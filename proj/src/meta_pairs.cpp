#include "laclip/meta_pairs.hpp"

#include "laclip/common.hpp"

namespace laclip {

namespace {

constexpr Strategy kC = Strategy::chatgpt;
constexpr Strategy kB = Strategy::bard;
constexpr Strategy kM = Strategy::mscoco;
constexpr Strategy kH = Strategy::human;

const std::array<MetaPair, 16> kChatgptPairs = {{
    {"white and red cheerful combination in the bedroom for girl",
     "A bright and lively white-and-red color scheme in a girl's bedroom, creating a cheerful "
     "ambiance.",
     kC},
    {"vintage photograph of a young boy feeding pigeons .",
     "A charming vintage photograph capturing a young boy feeding a flock of pigeons in a "
     "bustling city square.",
     kC},
    {"businessman with smartphone sitting on ledge by the sea",
     "Serene coastal view as a businessman sits on a ledge by the sea, using his smartphone.", kC},
    {"a tourist taking a photograph of river looking west towards suspension bridge and office",
     "Tourist snaps photo of suspension bridge and office building across the river.", kC},
    {"glass of foods and food product on a sunny day",
     "An assortment of food items and products displayed in a glass container, illuminated by "
     "bright sunshine.",
     kC},
    {"turtles and large fish in the pond",
     "A tranquil pond where large fish and turtles coexist peacefully, creating a harmonious "
     "natural habitat.",
     kC},
    {"the frescoes inside the dome",
     "The elaborate and intricate paintings or artworks adorning the inner surface of the dome, "
     "typically found in religious buildings.",
     kC},
    {"fight over a loose ball",
     "Intense competition as players struggle to gain control of a loose ball during the game.",
     kC},
    {"love this winter picture by person .",
     "Mesmerizing winter landscape by person: serene snowy scenery with gentle snowflakes, "
     "skillfully framed with perfect contrast and depth.",
     kC},
    {"one of several paths through the woods .",
     "A narrow forest path, one among many weaving through the lush trees, underbrush, and "
     "dappled sunlight.",
     kC},
    {"ripe strawberries falling through the water .",
     "Juicy ripe strawberries plummeting through a stream of water, splashing and creating "
     "ripples in the liquid.",
     kC},
    {"a city reflected on a red sunglasses .",
     "The cityscape reflected on a pair of red sunglasses, creating a distorted but fascinating "
     "view of the urban environment.",
     kC},
    {"man driving a car through the mountains",
     "A man confidently navigating a winding mountain road with breathtaking views.", kC},
    {"maritime museum from the historical dock .",
     "A museum dedicated to seafaring history, located on a historic dock where visitors can "
     "view a collection of artifacts and vessels.",
     kC},
    {"tree hollow and green leaves of a tree top in summer",
     "Amidst lush green leaves on the top of a tree, a hollow creates a natural shelter, typical "
     "of summer foliage.",
     kC},
    {"musician of musical group performs on stage on the first day of festival",
     "On the opening day of the festival, a musician from a musical group performs energetically "
     "on stage to a lively crowd.",
     kC},
}};

const std::array<MetaPair, 16> kBardPairs = {{
    {"man driving a car through the mountains",
     "A man drives his car through the mountains, the road winding its way through the towering "
     "peaks.",
     kB},
    {"a bicycle hanging above the entrance to a store",
     "A bicycle suspended from a chain above the entrance to a bike shop advertises their "
     "services.",
     kB},
    {"government agency released underwater footage of the unique movements of starfish",
     "New footage released by government agency shows starfish swimming in unique ways, shedding "
     "light on their underwater behavior.",
     kB},
    {"unique red chair among other white chairs at the stadium",
     "Red chair stands out among white seats at stadium, a beacon of color.", kB},
    {"person looks comfortable as he connects with a free - kick during the session and is in "
     "line to return against hull on saturday",
     "The player strikes a free-kick with confidence during training, looking sharp and ready "
     "for his return to the team against Hull on Saturday.",
     kB},
    {"animal in front of a white background",
     "An animal stands out against the stark white background, its feathers on full display.",
     kB},
    {"a mother and daughter lying on a lawn",
     "A mother and daughter embrace in the grass, enjoying the warmth of the sun and the sound "
     "of birdsong.",
     kB},
    {"sign is seen outside the home",
     "A for sale sign stands in the front yard, a reminder that change is always on the horizon.",
     kB},
    {"portrait of person against an abstract background stock photo",
     "person's face stands out against a swirling, abstract background, their expression one of "
     "mystery and intrigue.",
     kB},
    {"state flag waving on an isolated white background .",
     "The state flag waves proudly against a stark white background. The colors of the flag are "
     "vibrant and the design is intricate, representing the history and culture of the state",
     kB},
    {"actor wears a gorgeous blush pink coloured gown at festival .",
     "Actor stuns in blush pink gown at festival, her beauty a match for the flowers in bloom.",
     kB},
    {"person answering the phones again at the office .",
     "A friendly voice answers the phone, eager to help the caller with their needs.", kB},
    {"little boy sitting on the grass with drone and remote controller",
     "A young boy's eyes light up as he launches his drone into the sky, his imagination taking "
     "flight with it.",
     kB},
    {"golfer competes during day held",
     "Golfer focuses on the ball as she competes in a tournament on a beautiful day.", kB},
    {"golden fish in a bowl",
     "A golden fish swims lazily in a bowl, its scales shimmering in the sunlight. The fish is a "
     "beautiful shade of orange, with black spots on its fins and tail.",
     kB},
    {"businessman with smartphone sitting on ledge by the sea",
     "A businessman relaxes on a seaside ledge, checking his phone and enjoying the view.", kB},
}};

// Two of the five annotations of one image, fixed to the first two so
// prompt fixtures stay byte-exact.
const std::array<MetaPair, 16> kMscocoPairs = {{
    {"A herd of goats walking down a road way.",
     "Three lambs stand next to each other and look different directions.", kM},
    {"A boy is preparing to toss a frisbie while another boy is sitting in the background in a "
     "park.",
     "Several people are out in the woods on a path playing a game.", kM},
    {"A pizza sitting on top of a metal pan.",
     "The large pepperoni pizza is covered with chives.", kM},
    {"A woman sits on top of a motorcycle in a parade.",
     "Woman wearing starts on helmet and shorts rides motorcycle", kM},
    {"the people are sampling wine at a wine tasting.",
     "Group of people tasting wine next to some barrels.", kM},
    {"A herd of sheep walking down a street in front of a bus.",
     "There are three animals walking down the road.", kM},
    {"A sandwich with meat and cheese sits on a plate with a small salad.",
     "A sandwich with cheese and a bowl with a salad.", kM},
    {"A NASA airplane carrying a space shuttle on its back.",
     "A large plan with a smaller plan on top of it.", kM},
    {"A one way sign under a blue street sign.", "a view from below of a one way sign", kM},
    {"A bowl of food containing broccoli and tomatoes.",
     "A large salad is displayed in a silver metal bowl.", kM},
    {"a cake made to look like it has candy decorations on it",
     "A photograph of a highly decorated cake on a table.", kM},
    {"A young man riding a skateboard on a cement walkway.",
     "a guy riding a skateboard by a car", kM},
    {"A small brown dog sitting on display behind a window.",
     "A small fuzzy dog stares longingly out a window.", kM},
    {"A herd of sheep standing on a lush green hillside.",
     "Several animals standing on the side of a hill.", kM},
    {"The tennis player on the blue court has his racquet raised.",
     "A man swinging a tennis racket at a pro tennis match.", kM},
    {"A surfer riding a wave in a tempestuous ocean",
     "Man in body suit surfing on a large wave.", kM},
}};

const std::array<MetaPair, 16> kHumanPairs = {{
    {"Honey buttermilk biscuits on a cooling rack being drizzled with honey",
     "A warm stack of freshly baked honey buttermilk biscuits, sit on a cooling rack as they are "
     "drizzled with golden honey",
     kH},
    {"happy corgi time", "Delighted corgi stands in the hallway, looking at its owner", kH},
    {"<PERSON> dog looking at dirt from the ground",
     "<Person>'s dog, lying on the ground, looks at the dirt", kH},
    {"navy vintage pants - lime green bag - ivory Maison Simons t-shirt - Zara clogs",
     "A young beautiful lady wearing navy vintage pants and ivory Maison Simons t-shirt, is "
     "holding a lime green bag.",
     kH},
    {"Ooak Barbie City Shine",
     "A custom-made Barbie doll with a city-inspired look shines brightly", kH},
    {"Real Wedding on a NYC Rooftop",
     "a couple is kissing each other during their rooftop wedding in NYC", kH},
    {"the proud of my beloved italian bracco after leg amputation due to a tumor.",
     "my italian bracco lied down proudly under the sunshile, despite of leg amputation due to a "
     "tumor.",
     kH},
    {"Pineapple Wearing Headphones Art Print by Philip Haynes",
     "An art from Philip Haynes depicts a pineapple that wears headphones", kH},
    {"Ominous thunderclouds behind the Capitol Building",
     "Thunderclouds loom over the Capitol Building, casting a dark shadow", kH},
    {"Steampunk woman with gun",
     "A fierce and stylish steampunk woman holds a toy revolver in her hands", kH},
    {"a new watch with some old friends",
     "The watch sits besides a cartoon picture, evoking memories of cherished times shared with "
     "long-time friends",
     kH},
    {"Particularly important to Africa is the East African Highland Banana (EAHB), a staple food "
     "for 80 million people. Uganda alone has about 120 varieties of this type of banana.",
     "An African man holds a bunch of bananas, which is particularly important to Africa", kH},
    {"Electric Blue Guitar There Goes My Hero, Rock The Vote, <PERSON>, <PERSON>, Music Photo, "
     "Red Eyes, Photo Quotes, Electric Blue, Music Lyrics",
     "<PERSON> is playing an electric blue guitar, eyes bloodshot from the stage lights", kH},
    {"Advanced Bicycle Skills Video - Valuable Video for Safe Cycl",
     "A Cyclist is demonstrating advanced bicycle skills in a video that will help people stay "
     "safe.",
     kH},
    {"grilled turkey pesto sandwich",
     "A grilled turkey pesto sandwich with melted cheese and fresh arugula is served on a plate.",
     kH},
    {"Actress <PERSON> during the launch of international fashion brand Forever 21 store at a "
     "mall in Mumbai on Saturday, October 12th, 2013.",
     "The young beautiful actress attended the launch of fashion brand Forever 21 at a mall.",
     kH},
}};

}  // namespace

const std::array<MetaPair, 16>& meta_pairs(Strategy strategy) {
    switch (strategy) {
        case Strategy::chatgpt: return kChatgptPairs;
        case Strategy::bard: return kBardPairs;
        case Strategy::mscoco: return kMscocoPairs;
        case Strategy::human: return kHumanPairs;
    }
    throw UnknownStrategy("invalid strategy enum value");
}

std::string_view strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::chatgpt: return "chatgpt";
        case Strategy::bard: return "bard";
        case Strategy::mscoco: return "mscoco";
        case Strategy::human: return "human";
    }
    throw UnknownStrategy("invalid strategy enum value");
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : kAllStrategies) {
        if (strategy_name(s) == name) return s;
    }
    throw UnknownStrategy(std::string(name));
}

}  // namespace laclip
