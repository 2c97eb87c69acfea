"""
配置文件 - 自监督协同训练工具包
管理默认超参数、数据集参数和输出路径
所有参数都可以通过 COTRAIN_ 前缀的环境变量覆盖
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# 读取项目根目录下的 .env（如果存在）
load_dotenv()


def _env_int(name: str, default: int) -> int:
    """从环境变量读取整数"""
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


def _env_float(name: str, default: float) -> float:
    """从环境变量读取浮点数"""
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


# ==================== 文件路径配置 ====================
# 项目根目录
PROJECT_ROOT = Path(__file__).parent

# 输出根目录 - 实验报告、检查点、预览图片都写在这里
OUTPUT_DIR = Path(os.getenv("COTRAIN_OUTPUT_DIR", str(PROJECT_ROOT / "output")))
OUTPUT_DIR.mkdir(parents=True, exist_ok=True)

# 置换集默认文件
PERMSET_FILE = OUTPUT_DIR / "permutations_9_30.txt"

# ==================== 日志配置 ====================
LOG_LEVEL = os.getenv("COTRAIN_LOG_LEVEL", "INFO")

# 日志文件，设置为空字符串表示不写文件
LOG_FILE = os.getenv("COTRAIN_LOG_FILE", str(OUTPUT_DIR / "cotrain.log")) or None

# 每隔多少步输出一次训练进度
LOG_EVERY = _env_int("COTRAIN_LOG_EVERY", 100)

# ==================== 拼图任务 (jigsaw) ====================
# 图像划分为 N×N 块
GRID_N = 3

# 随机间隙 G（像素）- 每个轴上的总留白，裁剪尺寸为 tile - G
JIGSAW_GAP = _env_int("COTRAIN_JIGSAW_GAP", 20)

# 置换类别数 P（支持 30 或 100）
NUM_PERMUTATIONS = _env_int("COTRAIN_NUM_PERMUTATIONS", 30)

# 间隙和旋转空白区域的填充值（归一化后数据均值约为0）
FILL_VALUE = 0.0

# ==================== 旋转任务 (rotation) ====================
# 旋转类别数 K，角度粒度 360/K
NUM_ROTATIONS = 4

# ==================== 协同训练配置 ====================
# 训练比例 R：每步以 R/(R+1) 的概率选择监督任务
TRAINING_RATIO = _env_int("COTRAIN_TRAINING_RATIO", 6)

# 自监督任务权重 ω
SELFSUP_WEIGHT = _env_float("COTRAIN_SELFSUP_WEIGHT", 1.0)

# 总训练步数（基线与协同训练相同）
TOTAL_STEPS = _env_int("COTRAIN_TOTAL_STEPS", 6000)

# 动量SGD参数（固定学习率，无调度）
LEARNING_RATE = _env_float("COTRAIN_LEARNING_RATE", 0.01)
MOMENTUM = _env_float("COTRAIN_MOMENTUM", 0.9)

# 每个任务的批大小（监督与自监督相同）
BATCH_SIZE = _env_int("COTRAIN_BATCH_SIZE", 16)

# 默认随机种子
SEED = _env_int("COTRAIN_SEED", 0)

# 每隔多少步评估并保存检查点
EVAL_EVERY = _env_int("COTRAIN_EVAL_EVERY", 500)

# ==================== 模型配置 ====================
# 编码器四个下采样阶段的通道宽度
ENCODER_WIDTHS = (16, 32, 64, 128)

# ==================== 数据集配置 ====================
# 图像边长：能被 GRID_N=3 整除（32像素块），也能被 2^4 整除
IMAGE_SIZE = 96

# 形状类别（0 为背景）- 括号内为报告中使用的类别名
SHAPE_CLASSES = {
    1: "square",  # vehicle
    2: "triangle",  # person
    3: "circle",  # cycle
}
CLASS_REPORT_NAMES = {
    0: "background",
    1: "vehicle",
    2: "person",
    3: "cycle",
}
NUM_OBJECT_CLASSES = len(SHAPE_CLASSES)

# 刻意少采样的类别（circle/cycle）占比
CIRCLE_FRACTION = 0.15

# 训练样本数 N_1 与测试集比例
NUM_SAMPLES = _env_int("COTRAIN_NUM_SAMPLES", 1200)
TEST_FRACTION = 0.2

# ==================== 域迁移与噪声 ====================
# 夜间代理变换：亮度缩放系数和加性噪声标准差（0-255尺度）
NIGHT_BRIGHTNESS = 0.25
NIGHT_NOISE_SIGMA = 3.0

# 鲁棒性实验的高斯噪声强度（0-255尺度）
NOISE_SIGMAS = (0, 5, 10, 15)

# 实验默认种子列表
EXPERIMENT_SEEDS = (0, 1, 2)

# 实验并行进程数（1 表示顺序执行）
EXPERIMENT_WORKERS = _env_int("COTRAIN_WORKERS", 1)

# 训练时 DataLoader 预取自监督样本的 worker 数（0 表示在主进程生成）
DATA_WORKERS = _env_int("COTRAIN_DATA_WORKERS", 0)
