#!/usr/bin/env python3
"""Regenerates the bundled toy corpus, lexicon and pattern library."""
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

POOL = (
    "春风明月山水云天花落日江南秋夜雨雪寒烟柳鸟飞归人何处长孤城远客心愁思故乡"
    "白露青松流水高楼独上望千里万年东西北路行舟渡口清光照影红叶黄昏晚钟声寺门"
    "草木深浅沙岸古道马蹄边关塞外征鸿书信梦回灯火寂寞芳菲桃李杏梅竹兰菊荷池塘"
    "小桥溪畔酒杯琴诗歌舞楼台宫阙玉阶金殿霜华满地空林幽谷鹤松岭峰峦雾霞晴朝暮"
    "星河汉斗牛宿沧海波涛潮汐渔樵村野田园耕织蚕桑燕莺啼鹃声残更漏断肠离别相逢"
    "醉卧眠起坐看听闻笑泪衣裳鬓发老少年华岁月时节今昔往来去留君我谁家同此一二"
    "三五十百重九半初新旧冷暖轻浅淡浓苍翠碧紫绿朱丹素尘世间红颜知音未见已无犹"
    "自在从向与共随逐迷寻忆怀念伤悲喜乐闲忙静动开合落满微细斜横乱飘散聚"
)

KEYWORDS = ["春风", "明月", "江南", "故乡", "秋雨", "孤城", "落花", "山水", "归舟", "寒梅"]


def unique_chars(text):
    seen = []
    for ch in text:
        if ch not in seen:
            seen.append(ch)
    return seen


def main():
    rng = random.Random(7)
    chars = unique_chars(POOL)
    lexicon = {}
    for ch in chars:
        tone = rng.randrange(2)
        rhyme = rng.randrange(18)
        lexicon[ch] = (tone * 18 + rhyme, rhyme)
    with open(HERE / "lexicon.txt", "w", encoding="utf-8") as f:
        f.write("# char category rhyme_class (category = tone * 18 + rhyme)\n")
        for ch in chars:
            cat, rhyme = lexicon[ch]
            f.write(f"{ch} {cat} {rhyme}\n")

    keyword_chars = set("".join(KEYWORDS))
    content = [c for c in chars if c not in keyword_chars][:140]
    weights = [1.0 / (i + 1) ** 0.6 for i in range(len(content))]

    def draw():
        return rng.choices(content, weights)[0]

    poems = []
    for p in range(20):
        kws = rng.sample(KEYWORDS, 2)
        rhyme = rng.randrange(18)
        endings = [c for c in content if lexicon[c][0] == rhyme]
        if len(endings) < 3:
            endings = [c for c in content if lexicon[c][1] == rhyme] or content
        lines = []
        for i in range(4):
            body = []
            while len(body) < 6:
                ch = draw()
                if ch not in body:
                    body.append(ch)
            if i < 2:
                start = rng.randrange(5)
                body[start:start + 2] = list(kws[i])
                body = body[:6]
            if i in (0, 1, 3):
                end = rng.choice(endings)
            else:
                end = draw()
            while end in body:
                end = draw()
            lines.append("".join(body) + end)
        poems.append("|".join(lines) + "\t" + " ".join(kws))
    with open(HERE / "corpus.txt", "w", encoding="utf-8") as f:
        f.write("# 20 synthetic quatrains: lines joined by '|', keywords after a tab\n")
        for poem in poems:
            f.write(poem + "\n")

    free = 36
    level_rhyme = 3
    patterns = {
        "patterns": [
            {
                "name": "yi_wang_sun",
                "genre": "iambic",
                "lines": [
                    [free] * 6 + [level_rhyme],
                    [free] * 7,
                    [free] * 6 + [level_rhyme],
                    [free] * 3,
                    [free] * 6 + [level_rhyme],
                ],
                "rhyme_positions": [[0, 6], [2, 6], [4, 6]],
            },
            {
                "name": "qi_jue",
                "genre": "quatrain",
                "lines": [
                    [free] * 6 + [level_rhyme],
                    [free] * 6 + [level_rhyme],
                    [free] * 7,
                    [free] * 6 + [level_rhyme],
                ],
                "rhyme_positions": [[0, 6], [1, 6], [3, 6]],
            },
        ]
    }
    with open(HERE / "patterns.json", "w", encoding="utf-8") as f:
        json.dump(patterns, f, ensure_ascii=False, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
