import nox


module = 'vvb_learn'
tests = 'tests'
dirs = [module, tests]


@nox.session(python='3.9')
def lint(session):
    session.install('flake8', 'black', 'isort==4.3.21')

    session.run('black', '--check', '-l', '79', '-S', *dirs)
    session.run('isort', '--check-only', *dirs)
    session.run('flake8', '--show-source', '--statistics', *dirs)


@nox.session(python=['3.8', '3.9', '3.10'])
@nox.parametrize('sqlalchemy', ['>=1.4,<1.5'])
def test(session, sqlalchemy):
    session.install('pytest')
    session.install('-e', '.')
    session.install(f'SQLAlchemy{sqlalchemy}')
    session.run('pytest', *dirs, *session.posargs)


@nox.session(python='3.9')
def acceptance(session):
    session.install('pytest')
    session.install('-e', '.')
    session.run('pytest', tests, '--runslow', '-m', 'slow', *session.posargs)


@nox.session(python='3.9')
def coverage(session):
    session.install('pytest', 'pytest-cov', 'coverage')
    session.install('-e', '.')
    session.run(
        'pytest',
        '--cov-report',
        'term-missing',
        '--cov',
        *dirs,
        *session.posargs,
    )
