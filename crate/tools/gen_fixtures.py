#!/usr/bin/env python3
"""Regenerates the bundled data fixtures under data/.

Requires `pypinyin` (only used here, never at runtime). Output is
deterministic for a fixed pypinyin version.

    python3 tools/gen_fixtures.py
"""
import os
import random
from collections import Counter, defaultdict

from pypinyin import Style, pinyin

ROOT = os.path.join(os.path.dirname(__file__), "..", "data")

# Roughly frequency-ordered common characters.
COMMON = (
    "的一是不了人我在有他这为之大来以个中上们到说国和地也子时道出要于就下得可你年生自会那后能对着事其里所去行过家十用发天如然作方成者多日都三小军二无同么经法当起与好看学进种将还分此心前面又定见只主没公从知"
    "已工明问很最动开手意想回第走长把机理此老实现正两物体并新高力间做情重美口全加向由儿外让表山几些期门应部路样条文件比气身第头水爸妈她它边名点关问题车白马书电影音乐苹果咖啡茶饭菜衣服学校医院公园图书馆公司"
    "朋友老师同医生今明昨早晚周末每礼拜星期午夜喝吃买卖读写打篮球听唱跳跑步游泳看病检查住院护士药"
    "城市旅游火飞票酒店景色海边风雨雪冷热晴春夏秋冬历史文化故事诗歌画博物馆展览传统节日音乐会电视新闻报纸手机网络电脑软件数据"
    "工作会议项目经理客户合同价格市场产品销售银行钱账号贷款投资股票经济发展增长公司员工老板办公室"
    "足球比赛运动员冠军训练教练队伍体育场观众加油胜利失败成绩"
    "考试作业课程专业大学毕业研究论文实验知识问题答案复习预习上课下课教室黑板"
    "红黄蓝绿黑白大小多少快慢远近高低新旧好坏对错难易真假轻重"
    "爱喜欢讨厌希望觉得认为知道记得忘记相信担心害怕高兴开心难过生气着急放心"
    "东西南北左右前后里外中间旁边附近上下面"
    "猫狗鸟鱼花草树木米面包鸡蛋牛奶肉汤水果蔬菜西瓜香蕉葡萄橙子"
    "早饭午饭晚饭厨房客厅卧室窗户门桌子椅子床灯"
    "坐站睡醒等找送带拿放开关穿脱洗换修帮请谢对不起没关系再见你好欢迎"
    "除周间时候分钟小时半刻点钟号月份季节年纪岁"
    "爷奶哥姐弟妹叔阿姨孩子儿女丈夫妻子家人亲戚邻居"
    "快乐健康安全危险重要容易简单复杂方便漂亮干净舒服热闹安静"
    "词句段篇语言汉字拼音输入法预测模型候选准确率"
)

SUBJECTS = ["我", "你", "他", "她", "我们", "你们", "他们", "老师", "学生", "妈妈", "爸爸", "朋友们", "医生", "同学们", "哥哥", "姐姐", "弟弟", "妹妹", "爷爷", "奶奶"]
TIMES = ["今天", "明天", "昨天", "下午", "晚上", "早上", "周末", "下周一", "每天", "星期三", "礼拜天", "上午"]
PLACES = ["在学校", "在家里", "在公司", "在医院", "在公园", "在图书馆", "在教室", "在厨房", "在体育场", "在博物馆"]
ACTIONS = ["吃苹果", "喝咖啡", "看电影", "读书", "写作业", "打篮球", "听音乐", "买衣服", "学习汉字", "做饭", "上班", "开会", "跑步", "游泳", "唱歌", "画画", "看新闻", "踢足球", "洗衣服", "喝牛奶", "吃西瓜", "复习功课", "看病", "写论文", "做实验"]
THINGS = ["这本书", "那个电影", "这首歌", "这家医院", "那个公园", "这个城市", "这个问题", "那场比赛", "这家公司", "这个模型"]
ADJS = ["很好", "很有意思", "非常重要", "特别热闹", "很安静", "太复杂了", "很简单", "非常漂亮", "很方便", "很干净"]
PLACE_GO = ["北京", "上海", "海边", "公园", "图书馆", "博物馆", "医院", "学校", "银行", "超市"]
FEELINGS = ["很高兴", "很开心", "有点难过", "特别着急", "非常放心", "有点担心", "很生气"]


def sentence(rng):
    kind = rng.randrange(7)
    s = rng.choice(SUBJECTS)
    if kind == 0:
        return s + rng.choice(TIMES) + rng.choice(PLACES) + rng.choice(ACTIONS) + "。"
    if kind == 1:
        return s + "觉得" + rng.choice(THINGS) + rng.choice(ADJS) + "。"
    if kind == 2:
        return s + rng.choice(TIMES) + "想去" + rng.choice(PLACE_GO) + rng.choice(["玩", "看看", "买东西", "找朋友"]) + "。"
    if kind == 3:
        return s + "下周有时间，除了" + rng.choice(["礼拜一", "星期二", "周末", "明天"]) + "有点事。"
    if kind == 4:
        return s + rng.choice(TIMES) + rng.choice(FEELINGS) + "，因为" + rng.choice(SUBJECTS) + rng.choice(ACTIONS) + "了。"
    if kind == 5:
        return s + "喜欢" + rng.choice(ACTIONS) + "，不喜欢" + rng.choice(ACTIONS) + "。"
    return rng.choice(TIMES) + s + "要" + rng.choice(PLACES) + rng.choice(ACTIONS) + "，" + str(rng.randrange(2, 10)) + "点钟回来。"


DOMAIN_VOCAB = {
    "sports": ("足球比赛运动员冠军训练教练队伍体育场观众加油胜利失败成绩篮球跑步游泳", ["队员们", "教练", "观众", "运动员", "我们"]),
    "medical": ("医生医院护士看病检查住院药健康安全危险病人身体休息注意", ["医生", "护士", "病人", "我们", "大家"]),
    "finance": ("银行钱账号贷款投资股票经济发展增长公司员工老板市场价格产品销售", ["老板", "员工", "经理", "客户", "我们"]),
}


def domain_sentence(rng, vocab, subjects):
    # Long, punctuation-free clauses so every bucket pair is feasible.
    chars = list(dict.fromkeys(vocab))
    s = rng.choice(subjects) + rng.choice(TIMES)
    while len(s) < rng.randrange(22, 36):
        s += "".join(rng.choice(chars) for _ in range(2))
    return s + "。"


def main():
    rng = random.Random(20220501)
    train = []
    seen = set()
    while len(train) < 300:
        t = sentence(rng)
        if t not in seen:
            seen.add(t)
            train.append(t)
    domains = {}
    for name, (vocab, subjects) in DOMAIN_VOCAB.items():
        domains[name] = [domain_sentence(rng, vocab, subjects) for _ in range(60)]

    text = "".join(train) + "".join("".join(v) for v in domains.values())
    chars = []
    for c in COMMON + text:
        if "一" <= c <= "鿿" and c not in chars:
            chars.append(c)

    # Reading that the corpus actually uses goes first.
    used = defaultdict(Counter)
    for sent in train + [s for v in domains.values() for s in v]:
        readings = pinyin(sent, style=Style.NORMAL, errors=lambda x: [None] * len(x))
        for c, r in zip(sent, readings):
            if r[0]:
                used[c][r[0]] += 1

    rows = []
    syllables = set()
    for c in chars:
        cands = pinyin(c, style=Style.NORMAL, heteronym=True)[0]
        cands = [r for r in cands if r.isascii() and r.isalpha() and r not in ("m", "n", "ng", "hm", "hng", "r")]
        if not cands:
            continue
        if used[c]:
            top = used[c].most_common(1)[0][0]
            if top in cands:
                cands.remove(top)
            cands.insert(0, top)
        for r in cands[:3]:
            rows.append((c, r))
            syllables.add(r)

    os.makedirs(ROOT, exist_ok=True)
    with open(os.path.join(ROOT, "lexicon.tsv"), "w", encoding="utf-8") as f:
        f.write("# char\tsyllable\trank; rows for one char are ordered by preference\n")
        for rank, (c, r) in enumerate(rows):
            f.write(f"{c}\t{r}\t{rank}\n")

    with open(os.path.join(ROOT, "toy_train.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(train[:200]) + "\n")
    with open(os.path.join(ROOT, "toy_heldout.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(train[200:]) + "\n")
    for name, sents in domains.items():
        with open(os.path.join(ROOT, f"domain_{name}.txt"), "w", encoding="utf-8") as f:
            f.write("\n".join(sents) + "\n")

    # Standard syllable table with initial/final split, from pypinyin's
    # (non-strict) initial inventory, over every syllable in its dictionary.
    from pypinyin.style._utils import get_initials
    inventory = set()
    for code in range(0x4E00, 0x9FA6):
        for r in pinyin(chr(code), style=Style.NORMAL, heteronym=True)[0]:
            if r.isascii() and r.isalpha() and r not in ("m", "n", "ng", "hm", "hng", "r"):
                inventory.add(r)
    with open(os.path.join(ROOT, "syllable_table.tsv"), "w", encoding="utf-8") as f:
        f.write("# syllable\tinitial\tfinal\n")
        for s in sorted(inventory):
            ini = get_initials(s, strict=False)
            f.write(f"{s}\t{ini}\t{s[len(ini):]}\n")

    # PD-style sample: perfect pinyin, target chars, no context.
    with open(os.path.join(ROOT, "pd_sample.tsv"), "w", encoding="utf-8") as f:
        for sent in train[200:240]:
            run = sent.split("，")[0].rstrip("。")
            run = "".join(c for c in run if "一" <= c <= "鿿")[:8]
            py = " ".join(p[0] for p in pinyin(run, style=Style.NORMAL))
            f.write(f"{py}\t{run}\n")

    print(len(chars), "chars,", len(rows), "rows,", len(syllables), "syllables in lexicon,", len(inventory), "in table")


if __name__ == "__main__":
    main()
