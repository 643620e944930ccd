from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from app.config import DATABASE_URL, OUTPUT_ROOT

# Создание подключения к базе данных
if DATABASE_URL.startswith('sqlite:///') and not DATABASE_URL.startswith('sqlite:///:memory:'):
    OUTPUT_ROOT.mkdir(parents=True, exist_ok=True)
engine = create_engine(DATABASE_URL)
Base = declarative_base()
Session = sessionmaker(bind=engine)


def init_db():
    Base.metadata.create_all(engine)
