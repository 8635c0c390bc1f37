class GatewayError(RuntimeError):
    pass


class ExhaustedRetries(GatewayError):
    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(message)
        self.attempts = attempts


class AuthFailure(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass
