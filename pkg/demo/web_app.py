from concurrent.futures import ProcessPoolExecutor

from aiohttp import web

from crnclock.web import setup


def make_app(executor: ProcessPoolExecutor) -> web.Application:
    app = web.Application()
    setup(app, executor)
    return app


with ProcessPoolExecutor(max_workers=2) as executor:
    web.run_app(make_app(executor))
