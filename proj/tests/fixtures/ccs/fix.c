int ssl3_do_change_cipher_spec(SSL *s)
{
    int i;

    if (s->state & 0x1000)
        i = 0x12;
    else
        i = 0x22;

    if (s->s3->tmp.key_block == NULL) {
        if (!ssl3_setup_key_block(s))
            return 0;
    }
    s->s3->change_cipher_spec = 1;
    if (!ssl3_change_cipher_state(s, i))
        return 0;
    return 1;
}
