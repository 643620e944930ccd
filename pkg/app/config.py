import os
from pathlib import Path

from dotenv import load_dotenv

# Загрузка переменных окружения
load_dotenv()

VERSION = '0.1.0'

# Каталоги вывода и логов
OUTPUT_ROOT = Path(os.getenv('SHRINKERLAB_OUT', 'runs'))
LOG_DIR = Path(os.getenv('SHRINKERLAB_LOG_DIR', 'logs'))

# Каталог пресетов экспериментов
PRESET_DIR = Path(__file__).resolve().parent.parent / 'config'

# Настройки базы данных
DATABASE_URL = os.getenv('DATABASE_URL', f'sqlite:///{(OUTPUT_ROOT / "runs.db").as_posix()}')
