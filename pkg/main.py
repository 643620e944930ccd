import logging
import os
import sys
from logging import StreamHandler
from logging.handlers import TimedRotatingFileHandler

from icecream import ic

from app.config import LOG_DIR
from app.database.base import init_db
from app.handlers import parser
from errors import ConfigError, InputError, LabError


def setup_logging(debug: bool = False) -> None:
    """
    Настройка журналирования: файл с ежедневной ротацией и консоль
    / Logging setup: a daily rotated file and the console
    """
    if not LOG_DIR.exists():
        LOG_DIR.mkdir(parents=True)

    # Создаем обработчик, который будет создавать новый файл лога каждый день
    handler = TimedRotatingFileHandler(
        filename=os.path.join(LOG_DIR, 'app'),
        when='D',
        interval=1,
        backupCount=7,
        encoding='utf-8'
    )
    handler.suffix = "%Y-%m-%d_%H-%M-%S"
    handler.namer = lambda x: x + '.log'

    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            handler, StreamHandler()
        ],
        force=True
    )

    if debug:
        ic.configureOutput(includeContext=True)
        ic.enable()
    else:
        ic.disable()


def main(argv=None) -> int:
    """
    Точка входа CLI
    / CLI entry point

    Коды возврата: 0 - все проверки пройдены, 1 - есть непройденные, 2 - ошибка ввода
    / Exit codes: 0 - all checks pass, 1 - some check failed, 2 - invalid input or config
    """
    args = parser.parse_args(argv)
    setup_logging(args.debug)
    ic(args)

    # Инициализация реестра прогонов / Initialize the run registry
    init_db()

    try:
        return args.handler(args)
    except ConfigError as e:
        logging.error(f"Ошибка конфигурации: {e}; поля: {e.fields}")
        return 2
    except InputError as e:
        logging.error(f"Некорректные входные данные: {e}")
        return 2
    except LabError as e:
        logging.error(f"Ошибка выполнения {args.command}: {e}", exc_info=True)
        return 1


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logging.info("Остановлено пользователем")
        sys.exit(1)
    except Exception as e:
        logging.critical(f"Критическая ошибка: {e}", exc_info=True)
        sys.exit(2)
